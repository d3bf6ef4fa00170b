#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace snapdir::metrics {

/// (Σp - max - min) / (n - 2): drops exactly one maximum and one minimum instance.
/// Throws std::invalid_argument for fewer than 3 values.
double trimmed_mean(std::span<const double> fold_probs);

/// Row-wise trimmed mean over per-fold probability columns of equal length.
std::vector<double> ensemble(const std::vector<std::vector<double>>& fold_probs);

/// Probability that a random positive outranks a random negative, ties counting 1/2.
/// Throws std::invalid_argument unless both classes are present.
double auc_roc(std::span<const double> probs, std::span<const std::int8_t> labels);

struct ConfusionMatrix {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    std::size_t total() const noexcept { return tp + tn + fp + fn; }
};

struct ClassificationReport {
    ConfusionMatrix confusion;
    double accuracy = 0;
    double recall = 0;   // NaN without actual positives
    double pearson = 0;  // probability vs label; NaN when either is constant
};

/// A row is predicted positive iff prob >= threshold.
ClassificationReport classification_report(std::span<const double> probs, std::span<const std::int8_t> labels,
                                           double threshold = 0.5);

}  // namespace snapdir::metrics
