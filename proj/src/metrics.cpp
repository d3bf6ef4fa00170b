#include "snapdir/metrics.hpp"

#include "snapdir/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace snapdir::metrics {

double trimmed_mean(std::span<const double> p) {
    if (p.size() < 3) throw std::invalid_argument("trimmed_mean: need at least 3 fold probabilities");
    double sum = 0.0;
    double lo = p[0], hi = p[0];
    for (double v : p) {
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return (sum - hi - lo) / static_cast<double>(p.size() - 2);
}

std::vector<double> ensemble(const std::vector<std::vector<double>>& fold_probs) {
    if (fold_probs.size() < 3) throw std::invalid_argument("ensemble: need at least 3 fold models");
    const std::size_t n = fold_probs.front().size();
    for (const auto& f : fold_probs) {
        if (f.size() != n) throw std::invalid_argument("ensemble: fold prediction lengths differ");
    }
    std::vector<double> out(n);
    std::vector<double> row(fold_probs.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < fold_probs.size(); ++f) row[f] = fold_probs[f][i];
        out[i] = trimmed_mean(row);
    }
    return out;
}

double auc_roc(std::span<const double> probs, std::span<const std::int8_t> labels) {
    if (probs.size() != labels.size()) throw std::invalid_argument("auc_roc: length mismatch");
    const std::size_t n = probs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] < probs[b]; });

    // Mann-Whitney U: each positive scores the negatives below it plus half the tied ones.
    double u = 0.0;
    std::size_t negatives_below = 0, positives = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        std::size_t pos = 0, neg = 0;
        while (j < n && probs[order[j]] == probs[order[i]]) {
            (labels[order[j]] == 1 ? pos : neg) += 1;
            ++j;
        }
        u += static_cast<double>(pos) * (static_cast<double>(negatives_below) + 0.5 * static_cast<double>(neg));
        negatives_below += neg;
        positives += pos;
        i = j;
    }
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) throw std::invalid_argument("auc_roc: both classes must be present");
    return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

ClassificationReport classification_report(std::span<const double> probs, std::span<const std::int8_t> labels,
                                           double threshold) {
    if (probs.size() != labels.size()) throw std::invalid_argument("classification_report: length mismatch");
    if (probs.empty()) throw std::invalid_argument("classification_report: no rows");
    ClassificationReport rep;
    auto& cm = rep.confusion;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const bool predicted = probs[i] >= threshold;
        const bool actual = labels[i] == 1;
        if (predicted && actual) ++cm.tp;
        else if (predicted) ++cm.fp;
        else if (actual) ++cm.fn;
        else ++cm.tn;
    }
    rep.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    rep.recall = cm.tp + cm.fn > 0 ? static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn) : std::nan("");
    std::vector<double> y(labels.begin(), labels.end());
    try {
        rep.pearson = dataset::pearson(probs, y);
    } catch (const std::invalid_argument&) {
        rep.pearson = std::nan("");
    }
    return rep;
}

}  // namespace snapdir::metrics
