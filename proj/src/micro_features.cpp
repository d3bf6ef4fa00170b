#include "snapdir/micro_features.hpp"

#include <algorithm>
#include <stdexcept>

namespace snapdir::micro {
LevelSum accumulated_spread(const Snapshot& s, int k) noexcept {
    LevelSum out;
    for (std::size_t n = 0; n < static_cast<std::size_t>(k); ++n) {
        if (s.asks[n].quoted && s.bids[n].quoted) {
            out.value += s.asks[n].price_ticks - s.bids[n].price_ticks;
        } else {
            out.absent = true;
        }
    }
    return out;
}

LevelSum accumulated_imbalance(const Snapshot& s, int k) noexcept {
    LevelSum out;
    for (std::size_t n = 0; n < static_cast<std::size_t>(k); ++n) {
        if (s.asks[n].quoted) out.value += s.asks[n].size;
        if (s.bids[n].quoted) out.value -= s.bids[n].size;
        if (!s.asks[n].quoted || !s.bids[n].quoted) out.absent = true;
    }
    return out;
}

std::vector<double> rolling_mean(std::span<const std::int64_t> series, std::int64_t window, double scale) {
    if (window < 1) throw std::invalid_argument("rolling_mean: window must be >= 1");
    const auto w = static_cast<std::size_t>(window);
    std::vector<double> out(series.size(), kMissing);
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        sum += series[i];
        if (i >= w) sum -= series[i - w];
        if (i + 1 >= w) out[i] = static_cast<double>(sum) / static_cast<double>(window) * scale;
    }
    return out;
}

TypePercentages type_percentages(std::span<const preprocess::DerivedSnapshot> derived, const WindowSpec& window,
                                 std::optional<std::int64_t> min_volume_filter) {
    if (window.snapshots < 1) throw std::invalid_argument("type_percentages: window must be >= 1");
    const auto w = static_cast<std::size_t>(window.snapshots);
    const std::size_t n = derived.size();
    TypePercentages out;
    for (auto& v : out.pct) v.assign(n, kMissing);
    out.flags.assign(n, 0);
    std::array<std::int64_t, 5> counts{};
    std::int64_t members = 0;
    auto member = [&](const preprocess::DerivedSnapshot& d) {
        return !min_volume_filter || d.volume_chg >= *min_volume_filter;
    };
    for (std::size_t i = 0; i < n; ++i) {
        if (member(derived[i])) {
            ++counts[static_cast<std::size_t>(derived[i].type)];
            ++members;
        }
        if (i >= w && member(derived[i - w])) {
            --counts[static_cast<std::size_t>(derived[i - w].type)];
            --members;
        }
        if (i + 1 < w) continue;
        const std::int64_t denom = min_volume_filter ? members : window.snapshots;
        for (std::size_t t = 0; t < 4; ++t) {
            out.pct[t][i] = denom > 0 ? static_cast<double>(counts[t + 1]) / static_cast<double>(denom) : 0.0;
        }
        if (denom == 0) out.flags[i] |= kFlagEmptyFilteredSet;
    }
    return out;
}

OrderFlowSeries order_flow_features(std::span<const preprocess::DerivedSnapshot> derived, const WindowSpec& window) {
    if (window.snapshots < 1) throw std::invalid_argument("order_flow_features: window must be >= 1");
    const auto w = static_cast<std::size_t>(window.snapshots);
    const std::size_t n = derived.size();
    OrderFlowSeries out;
    out.open_close_pct.assign(n, kMissing);
    out.oi_ratio.assign(n, kMissing);
    out.flags.assign(n, 0);
    std::int64_t open = 0, close = 0;
    for (std::size_t i = 0; i < n; ++i) {
        open += derived[i].flow.open_halves;
        close += derived[i].flow.close_halves;
        if (i >= w) {
            open -= derived[i - w].flow.open_halves;
            close -= derived[i - w].flow.close_halves;
        }
        if (i + 1 < w) continue;
        if (close > 0) {
            out.open_close_pct[i] = static_cast<double>(open) / static_cast<double>(close);
        } else {
            out.flags[i] |= kFlagZeroCloseSum;
        }
        if (i >= w) {
            const std::int64_t past = derived[i - w].base->open_interest;
            if (past > 0) {
                out.oi_ratio[i] = static_cast<double>(derived[i].base->open_interest) / static_cast<double>(past);
            } else {
                out.flags[i] |= kFlagZeroOpenInterest;
            }
        }
    }
    return out;
}

std::vector<std::string> feature_names(std::span<const int> window_minutes) {
    std::vector<std::string> names;
    auto m = [](int minutes) { return "_m" + std::to_string(minutes); };
    for (const char* family : {"acc_spread", "acc_imb"}) {
        for (int minutes : window_minutes) {
            for (int k = 1; k <= kBookDepth; ++k) names.push_back(std::string(family) + "_k" + std::to_string(k) + m(minutes));
        }
    }
    for (const char* suffix : {"_pct", "_pctf"}) {
        for (int minutes : window_minutes) {
            for (int t = 1; t <= 4; ++t) names.push_back("type" + std::to_string(t) + suffix + m(minutes));
        }
    }
    for (int minutes : window_minutes) names.push_back("open_close_pct" + m(minutes));
    for (int minutes : window_minutes) names.push_back("oi_ratio" + m(minutes));
    return names;
}

MicroFeatureEngine::MicroFeatureEngine(const FeatureConfig& cfg, const TickScale& scale)
    : filter_threshold_(cfg.filter_threshold),
      tick_(scale.tick_size()),
      ring_([&] {
          std::int64_t widest = 1;
          for (int m : cfg.window_minutes) widest = std::max(widest, m * cfg.snapshots_per_minute);
          return static_cast<std::size_t>(widest) + 1;
      }()),
      names_(feature_names(cfg.window_minutes)) {
    for (int m : cfg.window_minutes) windows_.push_back(WindowSpec::from_minutes(m, cfg.snapshots_per_minute));
    state_.resize(windows_.size());
    row_.assign(names_.size(), kMissing);
}

void MicroFeatureEngine::reset() {
    ring_.clear();
    pushed_ = 0;
    std::fill(state_.begin(), state_.end(), WindowState{});
    std::fill(row_.begin(), row_.end(), kMissing);
    flags_ = 0;
}

void MicroFeatureEngine::apply(WindowState& w, const Frame& f, int sign) noexcept {
    for (std::size_t k = 0; k < kBookDepth; ++k) {
        w.spread[k] += sign * f.spread[k];
        w.imbalance[k] += sign * f.imbalance[k];
    }
    w.type_count[f.type] += sign;
    if (f.filtered) {
        w.filtered_type_count[f.type] += sign;
        w.filtered_count += sign;
    }
    w.open_halves += sign * f.open_halves;
    w.close_halves += sign * f.close_halves;
    w.absent += sign * static_cast<std::int64_t>(f.absent);
    w.inconsistent += sign * static_cast<std::int64_t>(f.inconsistent);
}

std::span<const double> MicroFeatureEngine::push(const preprocess::DerivedSnapshot& d) {
    const Snapshot& s = *d.base;
    Frame f;
    std::int64_t spread = 0, imbalance = 0;
    for (std::size_t n = 0; n < kBookDepth; ++n) {
        const auto& bid = s.bids[n];
        const auto& ask = s.asks[n];
        if (bid.quoted && ask.quoted) spread += ask.price_ticks - bid.price_ticks;
        if (ask.quoted) imbalance += ask.size;
        if (bid.quoted) imbalance -= bid.size;
        if (!bid.quoted || !ask.quoted) f.absent = true;
        f.spread[n] = spread;
        f.imbalance[n] = imbalance;
    }
    f.open_halves = d.flow.open_halves;
    f.close_halves = d.flow.close_halves;
    f.open_interest = s.open_interest;
    f.type = static_cast<std::uint8_t>(d.type);
    f.filtered = d.volume_chg >= filter_threshold_;
    f.inconsistent = (d.flags & (kFlagInconsistentFrame | kFlagVolumeRegression)) != 0;

    ring_.push(f);
    ++pushed_;
    flags_ = 0;

    const std::size_t nw = windows_.size();
    for (std::size_t wi = 0; wi < nw; ++wi) {
        auto& w = state_[wi];
        const auto size = static_cast<std::size_t>(windows_[wi].snapshots);
        apply(w, f, +1);
        if (pushed_ > size) apply(w, ring_.back(size), -1);
        if (w.absent > 0) flags_ |= kFlagAbsentLevel;
        if (w.inconsistent > 0) flags_ |= kFlagInconsistentFrame;
        if (pushed_ < size) continue;

        const double denom = static_cast<double>(size);
        for (std::size_t k = 0; k < kBookDepth; ++k) {
            row_[wi * kBookDepth + k] = static_cast<double>(w.spread[k]) / denom * tick_;
            row_[(nw + wi) * kBookDepth + k] = static_cast<double>(w.imbalance[k]) / denom;
        }
        const std::size_t pct = 10 * nw + wi * 4, pctf = 14 * nw + wi * 4;
        for (std::size_t t = 0; t < 4; ++t) {
            row_[pct + t] = static_cast<double>(w.type_count[t + 1]) / denom;
            row_[pctf + t] = w.filtered_count > 0 ? static_cast<double>(w.filtered_type_count[t + 1]) /
                                                        static_cast<double>(w.filtered_count)
                                                  : 0.0;
        }
        if (w.filtered_count == 0) flags_ |= kFlagEmptyFilteredSet;
        if (w.close_halves > 0) {
            row_[18 * nw + wi] = static_cast<double>(w.open_halves) / static_cast<double>(w.close_halves);
        } else {
            row_[18 * nw + wi] = kMissing;
            flags_ |= kFlagZeroCloseSum;
        }
        double ratio = kMissing;
        if (pushed_ > size) {
            const std::int64_t past = ring_.back(size).open_interest;
            if (past > 0) {
                ratio = static_cast<double>(f.open_interest) / static_cast<double>(past);
            } else {
                flags_ |= kFlagZeroOpenInterest;
            }
        }
        row_[19 * nw + wi] = ratio;
    }
    return row_;
}

FeatureFrame session_features(std::span<const preprocess::DerivedSnapshot> derived, const FeatureConfig& cfg,
                              const TickScale& scale) {
    MicroFeatureEngine engine(cfg, scale);
    FeatureFrame frame(engine.names(), derived.size());
    const std::size_t width = engine.width();
    for (std::size_t i = 0; i < derived.size(); ++i) {
        const auto row = engine.push(derived[i]);
        std::copy(row.begin(), row.end(), frame.values.begin() + static_cast<std::ptrdiff_t>(i * width));
        frame.flags[i] = engine.flags();
    }
    return frame;
}

}  // namespace snapdir::micro
