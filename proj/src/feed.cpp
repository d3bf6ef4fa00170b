#include "snapdir/feed.hpp"

#include "snapdir/calendar.hpp"
#include "snapdir/errors.hpp"
#include "snapdir/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <utility>

namespace snapdir {

// ---------------------------------------------------------------------------
// TickScale

TickScale TickScale::parse(std::string_view t) {
    t = text::trim(t);
    TickScale scale;
    const auto dot = t.find('.');
    std::string digits(t.substr(0, dot));
    int decimals = 0;
    if (dot != std::string_view::npos) {
        std::string frac(t.substr(dot + 1));
        while (!frac.empty() && frac.back() == '0') frac.pop_back();
        digits += frac;
        decimals = static_cast<int>(frac.size());
    }
    auto units = text::parse_int(digits);
    if (!units || *units <= 0 || decimals > 9) throw ConfigError("bad tick_size '" + std::string(t) + "'");
    scale.units = *units;
    scale.decimals = decimals;
    return scale;
}

double TickScale::tick_size() const noexcept {
    double d = static_cast<double>(units);
    for (int i = 0; i < decimals; ++i) d /= 10.0;
    return d;
}

std::string TickScale::format(std::int64_t ticks) const {
    std::int64_t scaled = ticks * units;
    std::string out;
    if (scaled < 0) {
        out += '-';
        scaled = -scaled;
    }
    std::int64_t pow10 = 1;
    for (int i = 0; i < decimals; ++i) pow10 *= 10;
    out += std::to_string(scaled / pow10);
    if (decimals > 0) {
        std::string frac = std::to_string(scaled % pow10);
        out += '.';
        out.append(static_cast<std::size_t>(decimals) - frac.size(), '0');
        out += frac;
    }
    return out;
}

bool TickScale::parse_price(std::string_view t, std::int64_t& ticks) const {
    if (t.empty()) return false;
    bool negative = false;
    if (t.front() == '-') {
        negative = true;
        t.remove_prefix(1);
    }
    const auto dot = t.find('.');
    auto int_part = t.substr(0, dot);
    std::string_view frac = dot == std::string_view::npos ? std::string_view{} : t.substr(dot + 1);
    if (int_part.empty() && frac.empty()) return false;
    std::int64_t scaled = 0;
    for (char c : int_part) {
        if (c < '0' || c > '9') return false;
        scaled = scaled * 10 + (c - '0');
    }
    for (int i = 0; i < decimals; ++i) {
        const char c = i < static_cast<int>(frac.size()) ? frac[static_cast<std::size_t>(i)] : '0';
        if (c < '0' || c > '9') return false;
        scaled = scaled * 10 + (c - '0');
    }
    for (std::size_t i = static_cast<std::size_t>(decimals); i < frac.size(); ++i) {
        if (frac[i] != '0') return false;
    }
    if (scaled % units != 0) return false;
    ticks = (negative ? -scaled : scaled) / units;
    return true;
}

std::string_view validate_snapshot(const Snapshot& s) noexcept {
    if (s.price_ticks <= 0) return "non_positive_price";
    if (s.volume < 0) return "negative_volume";
    if (s.open_interest < 0) return "negative_open_interest";
    for (const auto* ladder : {&s.bids, &s.asks}) {
        for (const auto& lvl : *ladder) {
            if (!lvl.quoted) continue;
            if (lvl.size < 0) return "negative_size";
            if (lvl.price_ticks <= 0) return "non_positive_level_price";
        }
    }
    std::int64_t prev = 0;
    bool have_prev = false;
    for (const auto& lvl : s.bids) {
        if (!lvl.quoted) continue;
        if (have_prev && lvl.price_ticks >= prev) return "bid_ladder_order";
        prev = lvl.price_ticks;
        have_prev = true;
    }
    have_prev = false;
    for (const auto& lvl : s.asks) {
        if (!lvl.quoted) continue;
        if (have_prev && lvl.price_ticks <= prev) return "ask_ladder_order";
        prev = lvl.price_ticks;
        have_prev = true;
    }
    if (s.bids[0].quoted && s.asks[0].quoted && s.bids[0].price_ticks > s.asks[0].price_ticks) return "crossed_book";
    return {};
}

namespace feed {
namespace {

constexpr std::array<std::string_view, 5> kMandatory = {"timestamp_ms", "instrument", "price", "volume",
                                                        "open_interest"};

std::vector<std::string> header_columns() {
    std::vector<std::string> cols(kMandatory.begin(), kMandatory.end());
    for (const char* side : {"bid", "ask"}) {
        for (const char* field : {"price", "size"}) {
            for (int n = 1; n <= kBookDepth; ++n) cols.push_back(std::string(side) + "_" + field + "_" + std::to_string(n));
        }
    }
    return cols;
}

const std::vector<std::string>& columns() {
    static const std::vector<std::string> cols = header_columns();
    return cols;
}

// Column index layout: 0..4 mandatory, then bid_price 1..5, bid_size 1..5, ask_price 1..5, ask_size 1..5.
constexpr std::size_t kBidPrice = 5, kBidSize = 10, kAskPrice = 15, kAskSize = 20, kColumnCount = 25;

// Integer count, tolerating a zero fraction ("12" or "12.0").
bool parse_count(std::string_view t, std::int64_t& out) {
    const auto dot = t.find('.');
    if (dot != std::string_view::npos) {
        for (char c : t.substr(dot + 1)) {
            if (c != '0') return false;
        }
        t = t.substr(0, dot);
    }
    auto v = text::parse_int(t);
    if (!v) return false;
    out = *v;
    return true;
}

/// Fields of one record as text, indexed by canonical column; nullopt = column absent/empty.
using RawRecord = std::array<std::string_view, kColumnCount>;

std::string_view parse_record(const RawRecord& f, const std::array<bool, kColumnCount>& present,
                              const TickScale& scale, Snapshot& s) {
    if (!text::parse_int(f[0])) return "bad_timestamp";
    s.timestamp_ms = *text::parse_int(f[0]);
    if (f[1].empty()) return "missing_instrument";
    s.instrument = std::string(f[1]);
    if (!scale.parse_price(f[2], s.price_ticks)) return "bad_price";
    if (!parse_count(f[3], s.volume)) return "bad_volume";
    if (!parse_count(f[4], s.open_interest)) return "bad_open_interest";
    for (int side = 0; side < 2; ++side) {
        auto& ladder = side == 0 ? s.bids : s.asks;
        const std::size_t price_col = side == 0 ? kBidPrice : kAskPrice;
        const std::size_t size_col = side == 0 ? kBidSize : kAskSize;
        for (std::size_t n = 0; n < kBookDepth; ++n) {
            auto& lvl = ladder[n];
            lvl = BookLevel{};
            const bool has_price = present[price_col + n] && !f[price_col + n].empty();
            const bool has_size = present[size_col + n] && !f[size_col + n].empty();
            if (!has_price && !has_size) continue;
            if (has_price != has_size) return "half_quoted_level";
            if (!scale.parse_price(f[price_col + n], lvl.price_ticks)) return "bad_level_price";
            if (!parse_count(f[size_col + n], lvl.size)) return "bad_level_size";
            lvl.quoted = true;
        }
    }
    return validate_snapshot(s);
}

void reject(ParseReport& report, std::string_view reason) {
    ++report.rows_rejected;
    ++report.rejected_by_reason[std::string(reason)];
}

bool has_absent_level(const Snapshot& s) {
    for (int n = 0; n < kBookDepth; ++n) {
        if (!s.bids[static_cast<std::size_t>(n)].quoted || !s.asks[static_cast<std::size_t>(n)].quoted) return true;
    }
    return false;
}

struct Slot {
    int window = -1;
    std::int32_t date = 0;
    friend bool operator==(const Slot&, const Slot&) = default;
};

Slot schedule_slot(std::int64_t ts, const FeedConfig& cfg) {
    const int minute = local_minute_of_day(ts, cfg.utc_offset_minutes);
    for (std::size_t w = 0; w < cfg.schedule.size(); ++w) {
        const auto& win = cfg.schedule[w];
        if (!win.contains(minute)) continue;
        std::int32_t date = local_yyyymmdd(ts, cfg.utc_offset_minutes);
        if (win.wraps() && minute < win.end_minute) date = add_days(date, -1);
        return Slot{static_cast<int>(w), date};
    }
    return Slot{};
}

std::string session_id_for(const std::string& instrument, std::int64_t start_ms, int utc_offset) {
    const int minute = local_minute_of_day(start_ms, utc_offset);
    char buf[32];
    std::snprintf(buf, sizeof buf, ".%08d.%02d%02d", local_yyyymmdd(start_ms, utc_offset), minute / 60, minute % 60);
    return instrument + buf;
}

Session finish_session(std::vector<Snapshot> snaps, const FeedConfig& cfg) {
    Session session;
    session.instrument = snaps.front().instrument;
    session.start_ms = snaps.front().timestamp_ms;
    session.end_ms = snaps.back().timestamp_ms;
    session.trading_day = local_yyyymmdd(session.start_ms, cfg.utc_offset_minutes);
    session.session_id = session_id_for(session.instrument, session.start_ms, cfg.utc_offset_minutes);
    session.scale = cfg.scale;
    session.snapshots = std::move(snaps);
    return session;
}

void check_fraction(const ParseReport& report, const FeedConfig& cfg) {
    if (report.rejected_fraction() > cfg.max_malformed_fraction) {
        std::string detail;
        for (const auto& [reason, n] : report.rejected_by_reason) detail += " " + reason + "=" + std::to_string(n);
        throw DataIntegrityError("rejected " + std::to_string(report.rows_rejected) + " of " +
                                 std::to_string(report.rows_read) + " rows, above the malformed-row limit:" + detail);
    }
}

ParseResult parse_csv(std::istream& in, const FeedConfig& cfg) {
    ParseResult result;
    std::string line;
    if (!std::getline(in, line)) throw DataIntegrityError("snapshot file is empty");
    const auto header = text::split(text::trim(line), ',');
    std::array<int, kColumnCount> col_of{};
    col_of.fill(-1);
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto name = text::trim(header[i]);
        const auto it = std::find(columns().begin(), columns().end(), name);
        if (it != columns().end()) col_of[static_cast<std::size_t>(it - columns().begin())] = static_cast<int>(i);
    }
    std::array<bool, kColumnCount> present{};
    for (std::size_t c = 0; c < kColumnCount; ++c) present[c] = col_of[c] >= 0;
    for (std::size_t c : {std::size_t{0}, std::size_t{1}, std::size_t{2}, std::size_t{3}, std::size_t{4}, kBidPrice,
                          kBidSize, kAskPrice, kAskSize}) {
        if (!present[c]) throw DataIntegrityError("missing mandatory column " + columns()[c]);
    }

    std::vector<Snapshot> accepted;
    std::vector<std::string_view> fields;
    RawRecord rec{};
    while (std::getline(in, line)) {
        const auto trimmed = text::trim(line);
        if (trimmed.empty()) continue;
        ++result.report.rows_read;
        text::split(trimmed, ',', fields);
        if (fields.size() != header.size()) {
            reject(result.report, "wrong_field_count");
            continue;
        }
        for (std::size_t c = 0; c < kColumnCount; ++c) {
            rec[c] = present[c] ? text::trim(fields[static_cast<std::size_t>(col_of[c])]) : std::string_view{};
        }
        Snapshot s;
        if (auto why = parse_record(rec, present, cfg.scale, s); !why.empty()) {
            reject(result.report, why);
            continue;
        }
        accepted.push_back(std::move(s));
    }
    result.sessions = group_sessions(std::move(accepted), cfg, result.report);
    return result;
}

ParseResult parse_ndjson(std::istream& in, const FeedConfig& cfg) {
    ParseResult result;
    std::vector<Snapshot> accepted;
    std::string line;
    std::array<bool, kColumnCount> present{};
    present.fill(true);
    std::array<std::string, kColumnCount> storage;
    RawRecord rec{};
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        ++result.report.rows_read;
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            reject(result.report, "bad_json");
            continue;
        }
        bool missing_mandatory = false;
        for (std::size_t c = 0; c < kColumnCount; ++c) {
            storage[c].clear();
            const auto it = obj.find(columns()[c]);
            if (it == obj.end() || it->is_null()) {
                if (c < kMandatory.size()) missing_mandatory = true;
            } else if (it->is_string()) {
                storage[c] = it->get<std::string>();
            } else if (it->is_number_integer()) {
                storage[c] = std::to_string(it->get<std::int64_t>());
            } else if (it->is_number_float()) {
                storage[c] = text::format_double(it->get<double>());
            } else {
                missing_mandatory = true;
            }
            rec[c] = storage[c];
        }
        if (missing_mandatory) {
            reject(result.report, "missing_field");
            continue;
        }
        Snapshot s;
        if (auto why = parse_record(rec, present, cfg.scale, s); !why.empty()) {
            reject(result.report, why);
            continue;
        }
        accepted.push_back(std::move(s));
    }
    result.sessions = group_sessions(std::move(accepted), cfg, result.report);
    return result;
}

}  // namespace

const std::string& csv_header() {
    static const std::string header = [] {
        std::string h;
        for (const auto& c : columns()) {
            if (!h.empty()) h += ',';
            h += c;
        }
        return h;
    }();
    return header;
}

Session make_session(std::vector<Snapshot> snapshots, const FeedConfig& cfg) {
    if (snapshots.empty()) throw std::invalid_argument("make_session: no snapshots");
    return finish_session(std::move(snapshots), cfg);
}

std::vector<Session> group_sessions(std::vector<Snapshot> snaps, const FeedConfig& cfg, ParseReport& report) {
    std::stable_sort(snaps.begin(), snaps.end(), [](const Snapshot& a, const Snapshot& b) {
        if (a.instrument != b.instrument) return a.instrument < b.instrument;
        return a.timestamp_ms < b.timestamp_ms;
    });
    const std::int64_t gap_ms = static_cast<std::int64_t>(cfg.session_gap_minutes) * kMsPerMinute;

    std::vector<Session> sessions;
    std::vector<Snapshot> current;
    Slot current_slot;
    auto flush = [&] {
        if (!current.empty()) sessions.push_back(finish_session(std::move(current), cfg));
        current.clear();
    };
    for (auto& s : snaps) {
        if (!current.empty()) {
            const auto& last = current.back();
            if (last.instrument == s.instrument && last.timestamp_ms == s.timestamp_ms) {
                reject(report, "duplicate_timestamp");
                continue;
            }
        }
        const Slot slot = schedule_slot(s.timestamp_ms, cfg);
        const bool boundary = current.empty() || current.back().instrument != s.instrument ||
                              s.timestamp_ms - current.back().timestamp_ms > gap_ms ||
                              (!cfg.schedule.empty() && slot != current_slot);
        if (boundary) {
            flush();
        } else if (s.volume < current.back().volume) {
            reject(report, "volume_regression");
            continue;
        }
        current_slot = slot;
        if (has_absent_level(s)) ++report.rows_with_absent_levels;
        current.push_back(std::move(s));
    }
    flush();
    std::stable_sort(sessions.begin(), sessions.end(), [](const Session& a, const Session& b) {
        if (a.start_ms != b.start_ms) return a.start_ms < b.start_ms;
        return a.instrument < b.instrument;
    });
    std::size_t accepted = 0;
    for (const auto& s : sessions) accepted += s.size();
    report.rows_accepted = accepted;
    return sessions;
}

ParseResult parse_snapshot_stream(std::istream& in, FileFormat format, const FeedConfig& cfg) {
    ParseResult result = format == FileFormat::Csv ? parse_csv(in, cfg) : parse_ndjson(in, cfg);
    check_fraction(result.report, cfg);
    return result;
}

ParseResult parse_snapshot_file(const std::filesystem::path& path, const FeedConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw DataIntegrityError("cannot read snapshot file " + path.string());
    const auto ext = path.extension().string();
    const auto format = (ext == ".ndjson" || ext == ".jsonl") ? FileFormat::Ndjson : FileFormat::Csv;
    return parse_snapshot_stream(in, format, cfg);
}

void write_csv_row(std::string& out, const Snapshot& s, const TickScale& scale) {
    text::append_int(out, s.timestamp_ms);
    out += ',';
    out += s.instrument;
    out += ',';
    out += scale.format(s.price_ticks);
    out += ',';
    text::append_int(out, s.volume);
    out += ',';
    text::append_int(out, s.open_interest);
    for (const auto* ladder : {&s.bids, &s.asks}) {
        for (const auto& lvl : *ladder) {
            out += ',';
            if (lvl.quoted) out += scale.format(lvl.price_ticks);
        }
        for (const auto& lvl : *ladder) {
            out += ',';
            if (lvl.quoted) text::append_int(out, lvl.size);
        }
    }
    out += '\n';
}

void write_csv(std::ostream& out, const std::vector<Session>& sessions) {
    out << csv_header() << '\n';
    std::string buf;
    for (const auto& session : sessions) {
        for (const auto& s : session.snapshots) {
            buf.clear();
            write_csv_row(buf, s, session.scale);
            out << buf;
        }
    }
}

void write_ndjson(std::ostream& out, const std::vector<Session>& sessions) {
    for (const auto& session : sessions) {
        for (const auto& s : session.snapshots) {
            nlohmann::ordered_json obj;
            obj["timestamp_ms"] = s.timestamp_ms;
            obj["instrument"] = s.instrument;
            obj["price"] = session.scale.format(s.price_ticks);
            obj["volume"] = s.volume;
            obj["open_interest"] = s.open_interest;
            for (int side = 0; side < 2; ++side) {
                const auto& ladder = side == 0 ? s.bids : s.asks;
                const std::string prefix = side == 0 ? "bid" : "ask";
                for (int n = 0; n < kBookDepth; ++n) {
                    const auto& lvl = ladder[static_cast<std::size_t>(n)];
                    const auto key = "_" + std::to_string(n + 1);
                    obj[prefix + "_price" + key] = lvl.quoted ? nlohmann::ordered_json(session.scale.format(lvl.price_ticks)) : nullptr;
                    obj[prefix + "_size" + key] = lvl.quoted ? nlohmann::ordered_json(lvl.size) : nullptr;
                }
            }
            out << obj.dump() << '\n';
        }
    }
}

}  // namespace feed
}  // namespace snapdir
