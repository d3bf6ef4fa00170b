#pragma once

#include "snapdir/config.hpp"
#include "snapdir/feature_frame.hpp"
#include "snapdir/preprocess.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace snapdir::ta {

enum class Family { Volume, Volatility, Trend, Momentum };

std::string_view to_string(Family f) noexcept;

struct IndicatorSpec {
    std::string name;
    Family family;
    std::vector<std::pair<std::string, double>> params;
};

/// Every indicator column with its family and effective parameters.
std::vector<IndicatorSpec> indicator_registry(const TaParams& p = {});
void dump_registry(std::ostream& out, std::span<const IndicatorSpec> registry);

// All indicator frames have one row per bar; warm-up rows hold kMissing.

/// volume_adi, volume_obv, volume_cmf, volume_fi, volume_em, volume_vpt
FeatureFrame compute_volume_indicators(std::span<const preprocess::OhlcvBar> bars, const TickScale& scale,
                                       const TaParams& p = {});

/// Bollinger, Keltner and Donchian bands: h/l/m(c)/w/p for each.
FeatureFrame compute_volatility_indicators(std::span<const preprocess::OhlcvBar> bars, const TickScale& scale,
                                           const TaParams& p = {});

/// MACD, signal, diff, fast/slow SMA, StochRSI with %K and %D.
FeatureFrame compute_trend_momentum(std::span<const preprocess::OhlcvBar> bars, const TickScale& scale,
                                    const TaParams& p = {});

FeatureFrame compute_indicators(std::span<const preprocess::OhlcvBar> bars, const TickScale& scale,
                                const TaParams& p = {});

/// Per-snapshot view: snapshot j takes the row of the most recent bar that completed
/// strictly before j. Rows before the first completed bar are missing.
FeatureFrame align_to_snapshots(const FeatureFrame& bar_frame, std::span<const preprocess::OhlcvBar> bars,
                                std::size_t n_snapshots);

/// Index of the bar aligned to each snapshot, or -1.
std::vector<std::ptrdiff_t> aligned_bar_index(std::span<const preprocess::OhlcvBar> bars, std::size_t n_snapshots);

/// bars -> indicators -> per-snapshot alignment for one session.
FeatureFrame session_features(const Session& session, std::span<const preprocess::DerivedSnapshot> derived,
                              const FeatureConfig& cfg);

}  // namespace snapdir::ta
