#pragma once

#include "snapdir/config.hpp"
#include "snapdir/preprocess.hpp"
#include "snapdir/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace snapdir::labeling {

enum class Target : std::int8_t { Down = 0, Up = 1, Dropped = -1 };

struct LabelRecord {
    std::size_t snapshot_index = 0;
    std::int64_t timestamp_ms = 0;
    double smoothed_price = 0;  // NaN before the first full window
    double log_return = 0;      // NaN when the horizon is unavailable
    Target target = Target::Dropped;
    bool zero_volume = false;
};

struct VwapResult {
    double value = 0;
    bool zero_volume = false;
};

/// Σ(p·v)/Σv over the window; the plain price mean (flagged) when Σv = 0.
/// Throws std::invalid_argument on an empty window.
VwapResult vwap(std::span<const std::pair<double, std::int64_t>> window);

/// Trailing `window`-snapshot VWAP at every index of a session, in currency units, with
/// integer running sums so every value equals a from-scratch recomputation exactly.
/// Indices before the first full window are NaN.
std::vector<VwapResult> smoothed_prices(const Session& session, std::span<const preprocess::DerivedSnapshot> derived,
                                        std::int64_t window);

/// Target for a log return: Up iff r >= theta, Down iff r <= -theta, else Dropped.
Target classify_return(double log_return, double theta) noexcept;

/// Labels a smoothed-price series: log_return(t) = ln(p[t + horizon] / p[t]).
/// Throws DataIntegrityError on a non-positive smoothed price.
std::vector<LabelRecord> label_series(std::span<const double> smoothed, std::int64_t horizon, double theta);

std::vector<LabelRecord> label_session(const Session& session, std::span<const preprocess::DerivedSnapshot> derived,
                                       const LabelConfig& cfg);

struct LabelDistribution {
    std::size_t up = 0;
    std::size_t down = 0;
    double pct_up = 0;    // NaN when empty
    double pct_down = 0;  // NaN when empty
    bool empty = true;
};

LabelDistribution label_distribution(std::span<const LabelRecord> labels);

/// `timestamp_ms,smoothed_price,log_return,target`; Dropped rows only with keep_dropped.
void write_labels_csv(std::ostream& out, std::span<const LabelRecord> labels, bool keep_dropped, bool with_header);

/// Parses rows written by write_labels_csv.
std::vector<LabelRecord> read_labels_csv(std::istream& in);

}  // namespace snapdir::labeling
