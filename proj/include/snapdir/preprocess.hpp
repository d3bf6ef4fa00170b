#pragma once

#include "snapdir/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace snapdir::preprocess {

/// Quadrant of (price change, open-interest change); Neutral when either is zero.
enum class SnapshotType : std::uint8_t { Neutral = 0, Type1 = 1, Type2 = 2, Type3 = 3, Type4 = 4 };

std::string_view to_string(SnapshotType t) noexcept;

/// Open/close contracts as counts of half contracts, so odd volume ± OI changes stay exact.
struct OpenClose {
    std::int64_t open_halves = 0;
    std::int64_t close_halves = 0;
    bool inconsistent = false;  // |oi_chg| > volume_chg; values were clamped

    double open() const noexcept { return static_cast<double>(open_halves) / 2.0; }
    double close() const noexcept { return static_cast<double>(close_halves) / 2.0; }
};

/// Solves open + close = volume_chg, open - close = oi_chg, clamping both into [0, volume_chg].
OpenClose solve_open_close(std::int64_t volume_chg, std::int64_t oi_chg) noexcept;

SnapshotType classify_snapshot(std::int64_t price_chg, std::int64_t oi_chg) noexcept;

struct DerivedSnapshot {
    const Snapshot* base = nullptr;
    std::int64_t price_chg = 0;  // ticks
    std::int64_t volume_chg = 0;
    std::int64_t oi_chg = 0;
    OpenClose flow;
    SnapshotType type = SnapshotType::Neutral;
    std::uint32_t flags = 0;  // RowFlag bits
};

/// Per-frame deltas. The first frame of a session restarts the cumulative volume
/// (volume_chg = volume) with oi_chg = 0. A cumulative-volume decrease flags the row
/// with kFlagVolumeRegression and zeroes its volume_chg.
std::vector<DerivedSnapshot> derive_deltas(const Session& session);

/// Streaming form of derive_deltas for one session at a time.
class DeltaDeriver {
public:
    DerivedSnapshot next(const Snapshot& s) noexcept;
    void reset() noexcept { prev_ = nullptr; }

private:
    const Snapshot* prev_ = nullptr;
};

struct OhlcvBar {
    std::int64_t bar_start_ms = 0;
    std::int64_t bar_end_ms = 0;  // timestamp of the last snapshot in the bar
    std::size_t first_index = 0;
    std::size_t count = 0;
    std::int64_t open = 0, high = 0, low = 0, close = 0;  // ticks
    std::int64_t volume = 0;
    bool short_bar = false;
};

/// Non-overlapping groups of `bar_snapshots` frames anchored at the session's first
/// snapshot; a trailing remainder becomes a short bar.
std::vector<OhlcvBar> build_bars(const Session& session, std::span<const DerivedSnapshot> derived,
                                 std::size_t bar_snapshots = 120);

void write_derived_csv(std::ostream& out, const Session& session, std::span<const DerivedSnapshot> derived,
                       bool with_header);
void write_bars_csv(std::ostream& out, const Session& session, std::span<const OhlcvBar> bars, bool with_header);

}  // namespace snapdir::preprocess
