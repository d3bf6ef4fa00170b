#include "snapdir/calendar.hpp"

#include "snapdir/errors.hpp"

#include <chrono>
#include <cstdio>

namespace snapdir {
namespace {

using namespace std::chrono;

sys_days to_sys_days(std::int32_t yyyymmdd) {
    const year_month_day ymd{year{yyyymmdd / 10000}, month{static_cast<unsigned>(yyyymmdd / 100 % 100)},
                             day{static_cast<unsigned>(yyyymmdd % 100)}};
    if (!ymd.ok()) throw ConfigError("invalid date " + std::to_string(yyyymmdd));
    return sys_days{ymd};
}

std::int32_t from_sys_days(sys_days d) {
    const year_month_day ymd{d};
    return static_cast<std::int32_t>(int(ymd.year()) * 10000 + unsigned(ymd.month()) * 100 + unsigned(ymd.day()));
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

int parse_hhmm(std::string_view t) {
    int h = 0, m = 0;
    if (t.size() != 5 || t[2] != ':' || std::sscanf(std::string(t).c_str(), "%2d:%2d", &h, &m) != 2 || h < 0 ||
        h > 24 || m < 0 || m > 59 || (h == 24 && m != 0)) {
        throw ConfigError("bad time of day '" + std::string(t) + "' (want HH:MM)");
    }
    return h * 60 + m;
}

}  // namespace

std::int32_t local_yyyymmdd(std::int64_t epoch_ms, int utc_offset_minutes) {
    const std::int64_t local = epoch_ms + utc_offset_minutes * kMsPerMinute;
    return from_sys_days(sys_days{days{floor_div(local, kMsPerDay)}});
}

int local_minute_of_day(std::int64_t epoch_ms, int utc_offset_minutes) {
    const std::int64_t local = epoch_ms + utc_offset_minutes * kMsPerMinute;
    const std::int64_t in_day = local - floor_div(local, kMsPerDay) * kMsPerDay;
    return static_cast<int>(in_day / kMsPerMinute);
}

std::int64_t local_to_epoch_ms(std::int32_t yyyymmdd, int minute_of_day, int utc_offset_minutes) {
    const auto d = to_sys_days(yyyymmdd).time_since_epoch().count();
    return static_cast<std::int64_t>(d) * kMsPerDay + (minute_of_day - utc_offset_minutes) * kMsPerMinute;
}

int weekday(std::int32_t yyyymmdd) {
    return static_cast<int>(std::chrono::weekday{to_sys_days(yyyymmdd)}.c_encoding());
}

std::int32_t add_days(std::int32_t yyyymmdd, int n) { return from_sys_days(to_sys_days(yyyymmdd) + days{n}); }

ScheduleWindow ScheduleWindow::parse(std::string_view text) {
    const auto dash = text.find('-');
    if (dash == std::string_view::npos) throw ConfigError("bad schedule window '" + std::string(text) + "'");
    ScheduleWindow w;
    w.start_minute = parse_hhmm(text.substr(0, dash));
    w.end_minute = parse_hhmm(text.substr(dash + 1));
    if (w.start_minute == w.end_minute) throw ConfigError("empty schedule window '" + std::string(text) + "'");
    return w;
}

std::string ScheduleWindow::to_string() const {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%02d:%02d-%02d:%02d", start_minute / 60, start_minute % 60, end_minute / 60,
                  end_minute % 60);
    return buf;
}

bool ScheduleWindow::contains(int minute) const noexcept {
    if (!wraps()) return minute >= start_minute && minute < end_minute;
    return minute >= start_minute || minute < end_minute;
}

}  // namespace snapdir
