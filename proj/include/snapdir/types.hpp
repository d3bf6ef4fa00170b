#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace snapdir {

inline constexpr int kBookDepth = 5;

/// Exact decimal tick size: one tick = units * 10^-decimals currency units.
struct TickScale {
    std::int64_t units = 1;
    int decimals = 0;

    /// Parses "1", "0.5", "0.005". Throws ConfigError on anything else.
    static TickScale parse(std::string_view text);

    double tick_size() const noexcept;
    double to_price(std::int64_t ticks) const noexcept { return static_cast<double>(ticks) * tick_size(); }

    /// Exact decimal text of ticks * tick_size.
    std::string format(std::int64_t ticks) const;

    /// Exact conversion of a decimal string onto the tick grid; false if off-grid or malformed.
    bool parse_price(std::string_view text, std::int64_t& ticks) const;

    std::string to_string() const { return format(1); }

    friend bool operator==(const TickScale&, const TickScale&) = default;
};

struct BookLevel {
    std::int64_t price_ticks = 0;
    std::int64_t size = 0;
    bool quoted = false;

    friend bool operator==(const BookLevel&, const BookLevel&) = default;
};

using Ladder = std::array<BookLevel, kBookDepth>;

/// One 500 ms exchange frame.
struct Snapshot {
    std::int64_t timestamp_ms = 0;
    std::string instrument;
    std::int64_t price_ticks = 0;
    std::int64_t volume = 0;         // session-cumulative contracts
    std::int64_t open_interest = 0;  // contracts
    Ladder bids{};
    Ladder asks{};

    friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

/// Contiguous run of snapshots from one instrument with no gap larger than the
/// configured session gap and no schedule boundary inside it.
struct Session {
    std::string session_id;
    std::string instrument;
    std::int32_t trading_day = 0;  // yyyymmdd of the session start, exchange-local
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;
    TickScale scale;
    std::vector<Snapshot> snapshots;

    std::size_t size() const noexcept { return snapshots.size(); }
};

/// Reasons a snapshot fails validation; empty string when valid.
std::string_view validate_snapshot(const Snapshot& s) noexcept;

}  // namespace snapdir
