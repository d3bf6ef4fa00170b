#include "snapdir/labeling.hpp"

#include "snapdir/errors.hpp"
#include "snapdir/text.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace snapdir::labeling {

VwapResult vwap(std::span<const std::pair<double, std::int64_t>> window) {
    if (window.empty()) throw std::invalid_argument("vwap: empty window");
    double pv = 0, p = 0;
    std::int64_t v = 0;
    for (const auto& [price, volume] : window) {
        pv += price * static_cast<double>(volume);
        p += price;
        v += volume;
    }
    if (v == 0) return {p / static_cast<double>(window.size()), true};
    return {pv / static_cast<double>(v), false};
}

std::vector<VwapResult> smoothed_prices(const Session& session, std::span<const preprocess::DerivedSnapshot> derived,
                                        std::int64_t window) {
    if (window < 1) throw std::invalid_argument("smoothed_prices: window must be positive");
    const auto& snaps = session.snapshots;
    const std::size_t w = static_cast<std::size_t>(window);
    std::vector<VwapResult> out(snaps.size(), VwapResult{std::nan(""), false});
    std::int64_t pv = 0, v = 0, p = 0;
    for (std::size_t i = 0; i < snaps.size(); ++i) {
        pv += snaps[i].price_ticks * derived[i].volume_chg;
        v += derived[i].volume_chg;
        p += snaps[i].price_ticks;
        if (i >= w) {
            pv -= snaps[i - w].price_ticks * derived[i - w].volume_chg;
            v -= derived[i - w].volume_chg;
            p -= snaps[i - w].price_ticks;
        }
        if (i + 1 < w) continue;
        const double tick = session.scale.tick_size();
        if (v == 0) {
            out[i] = {static_cast<double>(p) / static_cast<double>(w) * tick, true};
        } else {
            out[i] = {static_cast<double>(pv) / static_cast<double>(v) * tick, false};
        }
    }
    return out;
}

Target classify_return(double r, double theta) noexcept {
    if (std::isnan(r)) return Target::Dropped;
    if (r >= theta && r > 0) return Target::Up;
    if (r <= -theta && r < 0) return Target::Down;
    return Target::Dropped;
}

std::vector<LabelRecord> label_series(std::span<const double> smoothed, std::int64_t horizon, double theta) {
    if (horizon < 1) throw std::invalid_argument("label_series: horizon must be positive");
    const std::size_t h = static_cast<std::size_t>(horizon);
    std::vector<LabelRecord> out(smoothed.size());
    for (std::size_t t = 0; t < smoothed.size(); ++t) {
        auto& rec = out[t];
        rec.snapshot_index = t;
        rec.smoothed_price = smoothed[t];
        rec.log_return = std::nan("");
        if (!std::isnan(smoothed[t]) && smoothed[t] <= 0) {
            throw DataIntegrityError("non-positive smoothed price at index " + std::to_string(t));
        }
        if (t + h >= smoothed.size() || std::isnan(smoothed[t]) || std::isnan(smoothed[t + h])) continue;
        rec.log_return = std::log(smoothed[t + h] / smoothed[t]);
        rec.target = classify_return(rec.log_return, theta);
    }
    return out;
}

std::vector<LabelRecord> label_session(const Session& session, std::span<const preprocess::DerivedSnapshot> derived,
                                       const LabelConfig& cfg) {
    const auto vw = smoothed_prices(session, derived, cfg.window);
    std::vector<double> prices(vw.size());
    for (std::size_t i = 0; i < vw.size(); ++i) prices[i] = vw[i].value;
    auto labels = label_series(prices, cfg.horizon, cfg.theta);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        labels[i].timestamp_ms = session.snapshots[i].timestamp_ms;
        labels[i].zero_volume = vw[i].zero_volume;
    }
    return labels;
}

LabelDistribution label_distribution(std::span<const LabelRecord> labels) {
    LabelDistribution d;
    for (const auto& l : labels) {
        if (l.target == Target::Up) ++d.up;
        if (l.target == Target::Down) ++d.down;
    }
    const std::size_t n = d.up + d.down;
    d.empty = n == 0;
    if (d.empty) {
        d.pct_up = d.pct_down = std::nan("");
    } else {
        d.pct_up = 100.0 * static_cast<double>(d.up) / static_cast<double>(n);
        d.pct_down = 100.0 * static_cast<double>(d.down) / static_cast<double>(n);
    }
    return d;
}

void write_labels_csv(std::ostream& out, std::span<const LabelRecord> labels, bool keep_dropped, bool with_header) {
    if (with_header) out << "timestamp_ms,smoothed_price,log_return,target\n";
    std::string line;
    for (const auto& l : labels) {
        if (l.target == Target::Dropped && !keep_dropped) continue;
        line.clear();
        text::append_int(line, l.timestamp_ms);
        line += ',';
        text::append_double(line, l.smoothed_price);
        line += ',';
        text::append_double(line, l.log_return);
        line += ',';
        line += l.target == Target::Up ? "1" : l.target == Target::Down ? "0" : "dropped";
        line += '\n';
        out << line;
    }
}

std::vector<LabelRecord> read_labels_csv(std::istream& in) {
    std::vector<LabelRecord> out;
    std::string line;
    std::vector<std::string_view> f;
    while (std::getline(in, line)) {
        if (line.empty() || line.rfind("timestamp_ms", 0) == 0) continue;
        text::split(line, ',', f);
        if (f.size() != 4) throw DataIntegrityError("bad label row: " + line);
        LabelRecord r;
        auto ts = text::parse_int(f[0]);
        auto sp = text::parse_double(f[1]);
        auto lr = text::parse_double(f[2]);
        if (!ts || !sp || !lr) throw DataIntegrityError("bad label row: " + line);
        r.timestamp_ms = *ts;
        r.smoothed_price = *sp;
        r.log_return = *lr;
        r.target = f[3] == "1" ? Target::Up : f[3] == "0" ? Target::Down : Target::Dropped;
        out.push_back(r);
    }
    return out;
}

}  // namespace snapdir::labeling
