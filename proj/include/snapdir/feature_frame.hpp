#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace snapdir {

/// Missing-value marker for warm-up rows and undefined ratios.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) noexcept { return std::isnan(v); }

/// Row quality flags. A flag marks that some input contributing to the row was degenerate.
enum RowFlag : std::uint32_t {
    kFlagNone = 0,
    kFlagAbsentLevel = 1u << 0,        // a book level inside the window was not quoted
    kFlagInconsistentFrame = 1u << 1,  // |oi_chg| > volume_chg inside the window
    kFlagVolumeRegression = 1u << 2,   // cumulative volume went down
    kFlagEmptyFilteredSet = 1u << 3,   // no frame passed the institutional volume filter
    kFlagZeroCloseSum = 1u << 4,       // open/close ratio denominator was zero
    kFlagZeroOpenInterest = 1u << 5,   // OI ratio denominator was zero
    kFlagDegenerateBar = 1u << 6,      // H == L or zero-volume bar term
    kFlagFlatBand = 1u << 7,           // band collapse, %B emitted as 0.5
    kFlagFlatRsi = 1u << 8,            // flat RSI window, StochRSI emitted as 0.5
    kFlagZeroVolumeWindow = 1u << 9,   // VWAP fell back to a plain mean
    kFlagShortBar = 1u << 10,
};

std::string describe_flags(std::uint32_t flags);

/// Per-snapshot feature columns for one session, row-major.
struct FeatureFrame {
    std::vector<std::string> names;
    std::size_t rows = 0;
    std::vector<double> values;
    std::vector<std::uint32_t> flags;

    FeatureFrame() = default;
    FeatureFrame(std::vector<std::string> column_names, std::size_t n_rows)
        : names(std::move(column_names)), rows(n_rows), values(n_rows * names.size(), kMissing), flags(n_rows, 0) {}

    std::size_t cols() const noexcept { return names.size(); }
    double& at(std::size_t r, std::size_t c) noexcept { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const noexcept { return values[r * cols() + c]; }
    std::span<const double> row(std::size_t r) const noexcept { return {values.data() + r * cols(), cols()}; }
    std::size_t index_of(const std::string& name) const;  // throws std::out_of_range

    /// Appends the columns of `other` (same row count), OR-ing flags.
    void append_columns(const FeatureFrame& other);
};

/// Self-describing little-endian binary form used for pipeline artifacts.
void write_frames(std::ostream& out, std::span<const FeatureFrame> frames);
std::vector<FeatureFrame> read_frames(std::istream& in);

}  // namespace snapdir
