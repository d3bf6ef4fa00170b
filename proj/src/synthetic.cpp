#include "snapdir/synthetic.hpp"

#include "snapdir/calendar.hpp"
#include "snapdir/feed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <type_traits>

namespace snapdir::synth {

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

std::int64_t Rng::poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean > 40.0) {
        return std::max<std::int64_t>(0, std::llround(mean + std::sqrt(mean) * normal()));
    }
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double p = uniform();
    while (p > limit) {
        ++k;
        p *= uniform();
    }
    return k;
}

namespace {

template <typename T>
T clamp_param(T value, T lo, T hi, const char* name, std::vector<std::string>& warnings) {
    if (value < lo || value > hi || (std::is_floating_point_v<T> && value != value)) {
        const T fixed = value < lo ? lo : hi;
        warnings.push_back(std::string(name) + " clamped to " + std::to_string(fixed));
        return fixed;
    }
    return value;
}

SynthParams sanitize(SynthParams p, std::vector<std::string>& w) {
    p.n_snapshots = clamp_param<std::int64_t>(p.n_snapshots, 1, std::int64_t{1} << 40, "n_snapshots", w);
    p.session_snapshots = clamp_param<std::int64_t>(p.session_snapshots, 2, 10'000'000, "session_snapshots", w);
    p.session_start_minute = clamp_param(p.session_start_minute, 0, 1439, "session_start_minute", w);
    p.min_price_ticks = clamp_param<std::int64_t>(p.min_price_ticks, 20, std::int64_t{1} << 40, "min_price_ticks", w);
    p.max_price_ticks =
        clamp_param<std::int64_t>(p.max_price_ticks, p.min_price_ticks + 20, std::int64_t{1} << 41, "max_price_ticks", w);
    p.start_price_ticks = clamp_param(p.start_price_ticks, p.min_price_ticks, p.max_price_ticks, "start_price_ticks", w);
    p.move_prob = clamp_param(p.move_prob, 0.0, 1.0, "move_prob", w);
    p.drift = clamp_param(p.drift, -1.0, 1.0, "drift", w);
    p.signal = clamp_param(p.signal, 0.0, 1.0, "signal", w);
    p.signal_half_life = clamp_param(p.signal_half_life, 1.0, 1e9, "signal_half_life", w);
    p.mean_volume = clamp_param(p.mean_volume, 0.0, 1e4, "mean_volume", w);
    p.open_share = clamp_param(p.open_share, 0.0, 1.0, "open_share", w);
    p.initial_oi = clamp_param<std::int64_t>(p.initial_oi, 0, std::int64_t{1} << 40, "initial_oi", w);
    p.absent_level_prob = clamp_param(p.absent_level_prob, 0.0, 1.0, "absent_level_prob", w);
    if (p.instrument.empty()) {
        w.push_back("instrument defaulted to synth");
        p.instrument = "synth";
    }
    return p;
}

std::int32_t next_weekday(std::int32_t day) {
    while (weekday(day) == 0 || weekday(day) == 6) day = add_days(day, 1);
    return day;
}

// Book sizes lean toward the side the latent regime favors.
void fill_book(Snapshot& s, Rng& rng, double tilt, double absent_prob) {
    const bool bid_at_last = rng.bernoulli(0.5);
    std::int64_t bid = bid_at_last ? s.price_ticks : s.price_ticks - 1;
    std::int64_t ask = bid_at_last ? s.price_ticks + 1 : s.price_ticks;
    if (rng.bernoulli(0.1)) (bid_at_last ? ask : bid) += bid_at_last ? 1 : -1;
    const double bid_mean = 20.0 * (1.0 + tilt);
    const double ask_mean = 20.0 * (1.0 - tilt);
    int depth = kBookDepth;
    if (absent_prob > 0.0) {
        while (depth > 1 && rng.bernoulli(absent_prob)) --depth;
    }
    for (int n = 0; n < kBookDepth; ++n) {
        auto& b = s.bids[static_cast<std::size_t>(n)];
        auto& a = s.asks[static_cast<std::size_t>(n)];
        if (n > 0) {
            bid -= rng.bernoulli(0.2) ? 2 : 1;
            ask += rng.bernoulli(0.2) ? 2 : 1;
        }
        const std::int64_t bsize = 1 + rng.poisson(bid_mean);
        const std::int64_t asize = 1 + rng.poisson(ask_mean);
        if (n >= depth) continue;
        if (bid > 0) b = BookLevel{bid, bsize, true};
        a = BookLevel{ask, asize, true};
    }
}

}  // namespace

SyntheticFeed generate_synthetic_feed(const SynthParams& raw, const FeedConfig& feed_cfg) {
    SyntheticFeed out;
    const SynthParams p = sanitize(raw, out.warnings);
    Rng rng(p.seed);

    const double phi = std::pow(0.5, 1.0 / p.signal_half_life);
    const double innovation = std::sqrt(1.0 - phi * phi);
    double latent = rng.normal();
    std::int64_t price = p.start_price_ticks;
    std::int64_t oi = p.initial_oi;
    std::int32_t day = next_weekday(p.start_date);

    std::int64_t remaining = p.n_snapshots;
    while (remaining > 0) {
        const std::int64_t n = std::min(remaining, p.session_snapshots);
        remaining -= n;
        std::vector<Snapshot> snaps(static_cast<std::size_t>(n));
        std::vector<PlantedFlow> planted(static_cast<std::size_t>(n));
        const std::int64_t t0 = local_to_epoch_ms(day, p.session_start_minute, feed_cfg.utc_offset_minutes);
        std::int64_t cumulative = 0;
        for (std::int64_t i = 0; i < n; ++i) {
            latent = phi * latent + innovation * rng.normal();
            const double regime = p.signal * std::tanh(latent);
            if (i > 0 && rng.bernoulli(p.move_prob)) {
                const double bias = std::clamp(p.drift + regime, -0.95, 0.95);
                price += rng.bernoulli(0.5 * (1.0 + bias)) ? 1 : -1;
                if (price > p.max_price_ticks) price = p.max_price_ticks - 1;
                if (price < p.min_price_ticks) price = p.min_price_ticks + 1;
            }
            PlantedFlow flow;
            if (i > 0) {
                const std::int64_t v = rng.poisson(p.mean_volume);
                for (std::int64_t c = 0; c < v; ++c) (rng.bernoulli(p.open_share) ? flow.open : flow.close) += 1;
                // Open interest cannot go negative; excess closes become opens.
                if (oi + flow.open - flow.close < 0) {
                    const std::int64_t excess = flow.close - flow.open - oi;
                    flow.close -= excess;
                    flow.open += excess;
                }
            }
            cumulative += flow.open + flow.close;
            oi += flow.open - flow.close;

            auto& s = snaps[static_cast<std::size_t>(i)];
            s.timestamp_ms = t0 + i * 500;
            s.instrument = p.instrument;
            s.price_ticks = price;
            s.volume = cumulative;
            s.open_interest = oi;
            fill_book(s, rng, 0.5 * regime, p.absent_level_prob);
            planted[static_cast<std::size_t>(i)] = flow;
        }
        out.sessions.push_back(feed::make_session(std::move(snaps), feed_cfg));
        out.planted.push_back(std::move(planted));
        day = next_weekday(add_days(day, 1));
    }
    return out;
}

PlantedMatrix make_planted_matrix(const PlantedMatrixSpec& spec) {
    if (spec.n_rows == 0 || spec.n_features == 0 || spec.n_days == 0 || spec.n_days > spec.n_rows) {
        throw std::invalid_argument("make_planted_matrix: empty or inconsistent shape");
    }
    Rng rng(spec.seed);
    PlantedMatrix out;
    auto& m = out.matrix;

    out.coefficients.resize(spec.n_features);
    double norm = 0.0;
    for (auto& c : out.coefficients) {
        c = rng.normal();
        norm += c * c;
    }
    norm = std::sqrt(norm);
    for (auto& c : out.coefficients) c *= spec.coef_norm / norm;

    for (std::size_t f = 0; f < spec.n_features; ++f) m.columns.push_back("x" + std::to_string(f + 1));
    m.values.resize(spec.n_rows * spec.n_features);
    m.labels.resize(spec.n_rows);
    m.timestamps.resize(spec.n_rows);
    m.groups.resize(spec.n_rows);
    m.session_of_row.resize(spec.n_rows);
    m.prices.resize(spec.n_rows);

    std::int32_t day = next_weekday(20210104);
    std::size_t row = 0;
    double price = 100.0;
    for (std::size_t d = 0; d < spec.n_days; ++d) {
        const std::size_t end = spec.n_rows * (d + 1) / spec.n_days;
        const std::int64_t t0 = local_to_epoch_ms(day, 9 * 60, 480);
        char id[32];
        std::snprintf(id, sizeof id, "planted.%08d.0900", day);
        m.session_ids.emplace_back(id);
        for (std::size_t k = 0; row < end; ++row, ++k) {
            double z = 0.0;
            for (std::size_t f = 0; f < spec.n_features; ++f) {
                const double x = rng.normal();
                m.values[row * spec.n_features + f] = x;
                z += x * out.coefficients[f];
            }
            const double prob = spec.noise_labels ? 0.5 : 1.0 / (1.0 + std::exp(-z));
            m.labels[row] = rng.bernoulli(prob) ? 1 : 0;
            m.timestamps[row] = t0 + static_cast<std::int64_t>(k) * 500;
            m.groups[row] = day;
            m.session_of_row[row] = static_cast<std::uint32_t>(d);
            price *= 1.0 + 0.0005 * rng.normal();
            m.prices[row] = price;
        }
        day = next_weekday(add_days(day, 1));
    }
    return out;
}

}  // namespace snapdir::synth
