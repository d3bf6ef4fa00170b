#include "snapdir/preprocess.hpp"

#include "snapdir/feature_frame.hpp"
#include "snapdir/feed.hpp"
#include "snapdir/text.hpp"

#include <algorithm>
#include <ostream>

namespace snapdir::preprocess {

std::string_view to_string(SnapshotType t) noexcept {
    switch (t) {
        case SnapshotType::Type1: return "Type1";
        case SnapshotType::Type2: return "Type2";
        case SnapshotType::Type3: return "Type3";
        case SnapshotType::Type4: return "Type4";
        case SnapshotType::Neutral: break;
    }
    return "Neutral";
}

OpenClose solve_open_close(std::int64_t volume_chg, std::int64_t oi_chg) noexcept {
    OpenClose oc;
    const std::int64_t total = 2 * volume_chg;
    oc.open_halves = volume_chg + oi_chg;
    oc.close_halves = volume_chg - oi_chg;
    if (oi_chg > volume_chg || -oi_chg > volume_chg) {
        oc.inconsistent = true;
        oc.open_halves = std::clamp<std::int64_t>(oc.open_halves, 0, std::max<std::int64_t>(total, 0));
        oc.close_halves = std::max<std::int64_t>(total, 0) - oc.open_halves;
    }
    return oc;
}

SnapshotType classify_snapshot(std::int64_t price_chg, std::int64_t oi_chg) noexcept {
    if (price_chg == 0 || oi_chg == 0) return SnapshotType::Neutral;
    if (oi_chg > 0) return price_chg > 0 ? SnapshotType::Type1 : SnapshotType::Type2;
    return price_chg > 0 ? SnapshotType::Type3 : SnapshotType::Type4;
}

DerivedSnapshot DeltaDeriver::next(const Snapshot& s) noexcept {
    DerivedSnapshot d;
    d.base = &s;
    if (prev_ == nullptr) {
        d.volume_chg = s.volume;
    } else {
        d.price_chg = s.price_ticks - prev_->price_ticks;
        d.volume_chg = s.volume - prev_->volume;
        d.oi_chg = s.open_interest - prev_->open_interest;
        if (d.volume_chg < 0) {
            d.flags |= kFlagVolumeRegression;
            d.volume_chg = 0;
        }
    }
    d.flow = solve_open_close(d.volume_chg, d.oi_chg);
    if (d.flow.inconsistent) d.flags |= kFlagInconsistentFrame;
    d.type = classify_snapshot(d.price_chg, d.oi_chg);
    for (std::size_t n = 0; n < kBookDepth; ++n) {
        if (!s.bids[n].quoted || !s.asks[n].quoted) {
            d.flags |= kFlagAbsentLevel;
            break;
        }
    }
    prev_ = &s;
    return d;
}

std::vector<DerivedSnapshot> derive_deltas(const Session& session) {
    std::vector<DerivedSnapshot> out;
    out.reserve(session.size());
    DeltaDeriver deriver;
    for (const auto& s : session.snapshots) out.push_back(deriver.next(s));
    return out;
}

std::vector<OhlcvBar> build_bars(const Session& session, std::span<const DerivedSnapshot> derived,
                                 std::size_t bar_snapshots) {
    std::vector<OhlcvBar> bars;
    const auto& snaps = session.snapshots;
    for (std::size_t first = 0; first < snaps.size(); first += bar_snapshots) {
        const std::size_t last = std::min(first + bar_snapshots, snaps.size());
        OhlcvBar bar;
        bar.first_index = first;
        bar.count = last - first;
        bar.bar_start_ms = snaps[first].timestamp_ms;
        bar.bar_end_ms = snaps[last - 1].timestamp_ms;
        bar.open = snaps[first].price_ticks;
        bar.close = snaps[last - 1].price_ticks;
        bar.high = bar.low = bar.open;
        for (std::size_t i = first; i < last; ++i) {
            bar.high = std::max(bar.high, snaps[i].price_ticks);
            bar.low = std::min(bar.low, snaps[i].price_ticks);
            bar.volume += derived[i].volume_chg;
        }
        bar.short_bar = bar.count < bar_snapshots;
        bars.push_back(bar);
    }
    return bars;
}

void write_derived_csv(std::ostream& out, const Session& session, std::span<const DerivedSnapshot> derived,
                       bool with_header) {
    if (with_header) out << feed::csv_header() << ",volume_chg,oi_chg,open_contracts,close_contracts,snapshot_type,flags\n";
    std::string line;
    for (const auto& d : derived) {
        line.clear();
        feed::write_csv_row(line, *d.base, session.scale);
        line.pop_back();
        line += ',';
        text::append_int(line, d.volume_chg);
        line += ',';
        text::append_int(line, d.oi_chg);
        line += ',';
        text::append_double(line, d.flow.open());
        line += ',';
        text::append_double(line, d.flow.close());
        line += ',';
        line += to_string(d.type);
        line += ',';
        text::append_int(line, d.flags);
        line += '\n';
        out << line;
    }
}

void write_bars_csv(std::ostream& out, const Session& session, std::span<const OhlcvBar> bars, bool with_header) {
    if (with_header) out << "session_id,bar_start_ms,bar_end_ms,count,open,high,low,close,volume,short_bar\n";
    for (const auto& b : bars) {
        out << session.session_id << ',' << b.bar_start_ms << ',' << b.bar_end_ms << ',' << b.count << ','
            << session.scale.format(b.open) << ',' << session.scale.format(b.high) << ','
            << session.scale.format(b.low) << ',' << session.scale.format(b.close) << ',' << b.volume << ','
            << (b.short_bar ? 1 : 0) << '\n';
    }
}

}  // namespace snapdir::preprocess
