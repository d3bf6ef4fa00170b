#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace snapdir {

inline constexpr std::int64_t kMsPerMinute = 60'000;
inline constexpr std::int64_t kMsPerDay = 86'400'000;

/// Exchange-local calendar date as yyyymmdd.
std::int32_t local_yyyymmdd(std::int64_t epoch_ms, int utc_offset_minutes);

/// Minutes since exchange-local midnight, 0..1439.
int local_minute_of_day(std::int64_t epoch_ms, int utc_offset_minutes);

/// Epoch ms of an exchange-local wall-clock instant.
std::int64_t local_to_epoch_ms(std::int32_t yyyymmdd, int minute_of_day, int utc_offset_minutes);

/// Day of week for a yyyymmdd date, 0 = Sunday.
int weekday(std::int32_t yyyymmdd);

/// yyyymmdd shifted by a number of calendar days.
std::int32_t add_days(std::int32_t yyyymmdd, int days);

/// A daily trading window in exchange-local time, e.g. "21:00-02:30" (wraps midnight).
struct ScheduleWindow {
    int start_minute = 0;
    int end_minute = 0;

    static ScheduleWindow parse(std::string_view text);
    std::string to_string() const;

    bool wraps() const noexcept { return end_minute <= start_minute; }
    bool contains(int minute_of_day) const noexcept;

    friend bool operator==(const ScheduleWindow&, const ScheduleWindow&) = default;
};

}  // namespace snapdir
