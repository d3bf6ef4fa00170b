#pragma once

#include "snapdir/config.hpp"
#include "snapdir/feature_frame.hpp"
#include "snapdir/preprocess.hpp"
#include "snapdir/rolling.hpp"
#include "snapdir/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace snapdir::micro {

struct WindowSpec {
    int minutes = 5;
    std::int64_t snapshots = 600;

    static WindowSpec from_minutes(int minutes, std::int64_t snapshots_per_minute = 120) {
        return WindowSpec{minutes, static_cast<std::int64_t>(minutes) * snapshots_per_minute};
    }
};

struct LevelSum {
    std::int64_t value = 0;  // ticks for spreads, contracts for imbalance
    bool absent = false;     // a level within 1..k was not quoted on some side
};

/// Σ_{n=1..k} (ask_price_n - bid_price_n) in ticks; unquoted levels contribute 0.
LevelSum accumulated_spread(const Snapshot& s, int k) noexcept;

/// Σ_{n=1..k} (ask_size_n - bid_size_n); unquoted levels contribute 0.
LevelSum accumulated_imbalance(const Snapshot& s, int k) noexcept;

/// Trailing mean of an integer series times `scale`; the first window-1 entries are missing.
std::vector<double> rolling_mean(std::span<const std::int64_t> series, std::int64_t window, double scale = 1.0);

struct TypePercentages {
    std::array<std::vector<double>, 4> pct;  // Type1..Type4
    std::vector<std::uint32_t> flags;
};

/// Share of each snapshot type over the trailing window. Without a filter the denominator
/// is the full window; with one, only frames with volume_chg >= threshold count, in both
/// numerator and denominator (an empty filtered set yields 0 and kFlagEmptyFilteredSet).
TypePercentages type_percentages(std::span<const preprocess::DerivedSnapshot> derived, const WindowSpec& window,
                                 std::optional<std::int64_t> min_volume_filter = std::nullopt);

struct OrderFlowSeries {
    std::vector<double> open_close_pct;  // Σopen / Σclose over the window
    std::vector<double> oi_ratio;        // OI_i / OI_{i-window}
    std::vector<std::uint32_t> flags;
};

OrderFlowSeries order_flow_features(std::span<const preprocess::DerivedSnapshot> derived, const WindowSpec& window);

/// Column names in engine output order:
/// acc_spread_k{K}_m{M}, acc_imb_k{K}_m{M}, type{T}_pct_m{M}, type{T}_pctf_m{M},
/// open_close_pct_m{M}, oi_ratio_m{M}.
std::vector<std::string> feature_names(std::span<const int> window_minutes);

/// Streaming computation of all microstructure features for one session at a time.
/// Every window shares one ring of per-frame contributions; sums are integer so each
/// value equals a from-scratch recomputation over the same window exactly.
class MicroFeatureEngine {
public:
    MicroFeatureEngine(const FeatureConfig& cfg, const TickScale& scale);

    /// Starts a new session; windows never span sessions.
    void reset();

    /// Consumes the next frame and returns its feature row (valid until the next push).
    std::span<const double> push(const preprocess::DerivedSnapshot& d);
    std::uint32_t flags() const noexcept { return flags_; }

    const std::vector<std::string>& names() const noexcept { return names_; }
    std::size_t width() const noexcept { return names_.size(); }

private:
    struct Frame {
        std::array<std::int64_t, kBookDepth> spread{};
        std::array<std::int64_t, kBookDepth> imbalance{};
        std::int64_t open_halves = 0;
        std::int64_t close_halves = 0;
        std::int64_t open_interest = 0;
        std::uint8_t type = 0;
        bool filtered = false;
        bool absent = false;
        bool inconsistent = false;
    };

    struct WindowState {
        std::size_t size = 0;
        std::array<std::int64_t, kBookDepth> spread{};
        std::array<std::int64_t, kBookDepth> imbalance{};
        std::array<std::int64_t, 5> type_count{};
        std::array<std::int64_t, 5> filtered_type_count{};
        std::int64_t filtered_count = 0;
        std::int64_t open_halves = 0;
        std::int64_t close_halves = 0;
        std::int64_t absent = 0;
        std::int64_t inconsistent = 0;
    };

    void apply(WindowState& w, const Frame& f, int sign) noexcept;

    std::vector<WindowSpec> windows_;
    std::vector<WindowState> state_;
    std::int64_t filter_threshold_;
    double tick_;
    rolling::Ring<Frame> ring_;
    std::size_t pushed_ = 0;
    std::vector<std::string> names_;
    std::vector<double> row_;
    std::uint32_t flags_ = 0;
};

/// Batch form: one row per frame of a session.
FeatureFrame session_features(std::span<const preprocess::DerivedSnapshot> derived, const FeatureConfig& cfg,
                              const TickScale& scale);

}  // namespace snapdir::micro
