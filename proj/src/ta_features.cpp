#include "snapdir/ta_features.hpp"

#include "snapdir/rolling.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>

namespace snapdir::ta {

__extension__ using wide_int = __int128;
namespace {

using preprocess::OhlcvBar;

struct Columns {
    FeatureFrame frame;
    explicit Columns(std::vector<std::string> names, std::size_t rows) : frame(std::move(names), rows) {}
    void set(std::size_t row, std::size_t col, double v) { frame.at(row, col) = v; }
    void flag(std::size_t row, std::uint32_t f) { frame.flags[row] |= f; }
};

/// Trailing integer sums over a window, divided by `divisor * window`; NaN during warm-up.
std::vector<double> rolling_mean_ticks(std::span<const std::int64_t> x, std::size_t w, std::int64_t divisor,
                                       double tick) {
    std::vector<double> out(x.size(), kMissing);
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sum += x[i];
        if (i >= w) sum -= x[i - w];
        if (i + 1 >= w) out[i] = static_cast<double>(sum) / static_cast<double>(divisor * static_cast<std::int64_t>(w)) * tick;
    }
    return out;
}

/// Simple mean of a double series with a missing prefix; NaN until w valid values.
std::vector<double> rolling_mean(std::span<const double> x, std::size_t w) {
    std::vector<double> out(x.size(), kMissing);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (i + 1 < w) continue;
        double sum = 0;
        bool ok = true;
        for (std::size_t j = i + 1 - w; j <= i; ++j) {
            if (is_missing(x[j])) {
                ok = false;
                break;
            }
            sum += x[j];
        }
        if (ok) out[i] = sum / static_cast<double>(w);
    }
    return out;
}

/// EMA over the valid suffix of x (leading NaNs skipped), seeded with the SMA of the first n values.
std::vector<double> ema_series(std::span<const double> x, std::size_t n) {
    std::vector<double> out(x.size(), kMissing);
    rolling::Ema ema(n);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (is_missing(x[i])) continue;
        ema.push(x[i]);
        if (ema.ready()) out[i] = ema.value();
    }
    return out;
}

double band_position(double close, double low, double high, Columns& c, std::size_t row) {
    if (high > low) return (close - low) / (high - low);
    c.flag(row, kFlagFlatBand);
    return 0.5;
}

}  // namespace

std::string_view to_string(Family f) noexcept {
    switch (f) {
        case Family::Volume: return "volume";
        case Family::Volatility: return "volatility";
        case Family::Trend: return "trend";
        case Family::Momentum: return "momentum";
    }
    return "?";
}

std::vector<IndicatorSpec> indicator_registry(const TaParams& p) {
    using P = std::vector<std::pair<std::string, double>>;
    std::vector<IndicatorSpec> r;
    auto add = [&r](std::string name, Family f, P params) { r.push_back({std::move(name), f, std::move(params)}); };
    add("volume_adi", Family::Volume, {});
    add("volume_obv", Family::Volume, {});
    add("volume_cmf", Family::Volume, {{"window", p.cmf_window}});
    add("volume_fi", Family::Volume, {{"window", p.force_window}});
    add("volume_em", Family::Volume, {{"window", p.eom_window}});
    add("volume_vpt", Family::Volume, {{"window", p.vpt_window}});
    for (const char* band : {"bbh", "bbl", "bbm", "bbw", "bbp"}) {
        add(std::string("volatility_") + band, Family::Volatility, {{"window", p.bb_window}, {"window_dev", p.bb_dev}});
    }
    for (const char* band : {"kch", "kcl", "kcc", "kcw", "kcp"}) {
        add(std::string("volatility_") + band, Family::Volatility, {{"window", p.kc_window}});
    }
    for (const char* band : {"dch", "dcl", "dcm", "dcw", "dcp"}) {
        add(std::string("volatility_") + band, Family::Volatility, {{"window", p.dc_window}});
    }
    const P macd{{"window_slow", p.macd_slow}, {"window_fast", p.macd_fast}, {"window_sign", p.macd_sign}};
    add("trend_macd", Family::Trend, macd);
    add("trend_macd_signal", Family::Trend, macd);
    add("trend_macd_diff", Family::Trend, macd);
    add("trend_sma_fast", Family::Trend, {{"window", p.sma_fast}});
    add("trend_sma_slow", Family::Trend, {{"window", p.sma_slow}});
    const P stoch{{"window", p.stoch_window}, {"rsi_window", p.rsi_window}, {"smooth1", p.smooth_k}, {"smooth2", p.smooth_d}};
    add("momentum_stoch_rsi", Family::Momentum, stoch);
    add("momentum_stoch_rsi_k", Family::Momentum, stoch);
    add("momentum_stoch_rsi_d", Family::Momentum, stoch);
    return r;
}

void dump_registry(std::ostream& out, std::span<const IndicatorSpec> registry) {
    for (const auto& spec : registry) {
        out << spec.name << '\t' << to_string(spec.family);
        for (const auto& [k, v] : spec.params) out << '\t' << k << '=' << v;
        out << '\n';
    }
}

FeatureFrame compute_volume_indicators(std::span<const OhlcvBar> bars, const TickScale& scale, const TaParams& p) {
    const std::size_t n = bars.size();
    const double tick = scale.tick_size();
    Columns c({"volume_adi", "volume_obv", "volume_cmf", "volume_fi", "volume_em", "volume_vpt"}, n);

    std::vector<double> clv_vol(n), vol(n), force_raw(n, kMissing), eom_raw(n, kMissing), vpt(n);
    double adi = 0, obv = 0, vpt_cum = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const auto& b = bars[t];
        const double h = b.high * tick, l = b.low * tick, cl = b.close * tick, v = static_cast<double>(b.volume);
        double clv = 0;
        if (b.high > b.low) {
            clv = ((cl - l) - (h - cl)) / (h - l);
        } else {
            c.flag(t, kFlagDegenerateBar);
        }
        clv_vol[t] = clv * v;
        vol[t] = v;
        adi += clv * v;
        c.set(t, 0, adi);
        if (t > 0) {
            const auto& prev = bars[t - 1];
            const double pc = prev.close * tick;
            if (b.close > prev.close) obv += v;
            if (b.close < prev.close) obv -= v;
            force_raw[t] = (cl - pc) * v;
            if (b.volume > 0) {
                eom_raw[t] = ((h + l) / 2.0 - (prev.high * tick + prev.low * tick) / 2.0) * (h - l) / v;
            } else {
                eom_raw[t] = 0.0;
                c.flag(t, kFlagDegenerateBar);
            }
            vpt_cum += v * (cl - pc) / pc;
        }
        c.set(t, 1, obv);
        vpt[t] = vpt_cum;
    }

    const std::size_t cmf_w = static_cast<std::size_t>(p.cmf_window);
    for (std::size_t t = cmf_w - 1; t < n; ++t) {
        double num = 0, den = 0;
        for (std::size_t j = t + 1 - cmf_w; j <= t; ++j) {
            num += clv_vol[j];
            den += vol[j];
        }
        if (den > 0) {
            c.set(t, 2, num / den);
        } else {
            c.set(t, 2, 0.0);
            c.flag(t, kFlagDegenerateBar);
        }
    }
    const auto fi = ema_series(force_raw, static_cast<std::size_t>(p.force_window));
    const auto em = rolling_mean(eom_raw, static_cast<std::size_t>(p.eom_window));
    const auto vpt_sma = rolling_mean(vpt, static_cast<std::size_t>(p.vpt_window));
    for (std::size_t t = 0; t < n; ++t) {
        c.set(t, 3, fi[t]);
        c.set(t, 4, em[t]);
        c.set(t, 5, vpt_sma[t]);
    }
    return std::move(c.frame);
}

FeatureFrame compute_volatility_indicators(std::span<const OhlcvBar> bars, const TickScale& scale, const TaParams& p) {
    const std::size_t n = bars.size();
    const double tick = scale.tick_size();
    Columns c({"volatility_bbh", "volatility_bbl", "volatility_bbm", "volatility_bbw", "volatility_bbp",
               "volatility_kch", "volatility_kcl", "volatility_kcc", "volatility_kcw", "volatility_kcp",
               "volatility_dch", "volatility_dcl", "volatility_dcm", "volatility_dcw", "volatility_dcp"},
              n);

    std::vector<std::int64_t> close(n), typical(n), upper(n), lower(n);
    for (std::size_t t = 0; t < n; ++t) {
        const auto& b = bars[t];
        close[t] = b.close;
        typical[t] = b.high + b.low + b.close;
        upper[t] = 4 * b.high - 2 * b.low + b.close;
        lower[t] = -2 * b.high + 4 * b.low + b.close;
    }

    // Bollinger: population deviation from integer sums.
    const std::size_t bw = static_cast<std::size_t>(p.bb_window);
    std::int64_t sum = 0;
    wide_int sum_sq = 0;
    for (std::size_t t = 0; t < n; ++t) {
        sum += close[t];
        sum_sq += static_cast<wide_int>(close[t]) * close[t];
        if (t >= bw) {
            sum -= close[t - bw];
            sum_sq -= static_cast<wide_int>(close[t - bw]) * close[t - bw];
        }
        if (t + 1 < bw) continue;
        const auto w = static_cast<std::int64_t>(bw);
        const double mid = static_cast<double>(sum) / static_cast<double>(w) * tick;
        const wide_int num = static_cast<wide_int>(w) * sum_sq - static_cast<wide_int>(sum) * sum;
        const double sigma = std::sqrt(static_cast<double>(num) / static_cast<double>(w * w)) * tick;
        const double hi = mid + p.bb_dev * sigma, lo = mid - p.bb_dev * sigma;
        c.set(t, 0, hi);
        c.set(t, 1, lo);
        c.set(t, 2, mid);
        c.set(t, 3, (hi - lo) / mid * 100.0);
        c.set(t, 4, band_position(close[t] * tick, lo, hi, c, t));
    }

    // Keltner on typical price.
    const std::size_t kw = static_cast<std::size_t>(p.kc_window);
    const auto kcc = rolling_mean_ticks(typical, kw, 3, tick);
    const auto kch = rolling_mean_ticks(upper, kw, 3, tick);
    const auto kcl = rolling_mean_ticks(lower, kw, 3, tick);
    for (std::size_t t = kw - 1; t < n; ++t) {
        c.set(t, 5, kch[t]);
        c.set(t, 6, kcl[t]);
        c.set(t, 7, kcc[t]);
        c.set(t, 8, (kch[t] - kcl[t]) / kcc[t] * 100.0);
        c.set(t, 9, band_position(close[t] * tick, kcl[t], kch[t], c, t));
    }

    // Donchian extrema.
    const std::size_t dw = static_cast<std::size_t>(p.dc_window);
    rolling::MonotoneWindow<std::int64_t, std::greater<>> highs(dw);
    rolling::MonotoneWindow<std::int64_t, std::less<>> lows(dw);
    for (std::size_t t = 0; t < n; ++t) {
        highs.push(bars[t].high);
        lows.push(bars[t].low);
        if (!highs.full()) continue;
        const double hi = highs.value() * tick, lo = lows.value() * tick;
        const double mid = (hi + lo) / 2.0;
        c.set(t, 10, hi);
        c.set(t, 11, lo);
        c.set(t, 12, mid);
        c.set(t, 13, (hi - lo) / mid * 100.0);
        c.set(t, 14, band_position(close[t] * tick, lo, hi, c, t));
    }
    return std::move(c.frame);
}

FeatureFrame compute_trend_momentum(std::span<const OhlcvBar> bars, const TickScale& scale, const TaParams& p) {
    const std::size_t n = bars.size();
    const double tick = scale.tick_size();
    Columns c({"trend_macd", "trend_macd_signal", "trend_macd_diff", "trend_sma_fast", "trend_sma_slow",
               "momentum_stoch_rsi", "momentum_stoch_rsi_k", "momentum_stoch_rsi_d"},
              n);

    std::vector<double> close(n);
    std::vector<std::int64_t> close_ticks(n);
    for (std::size_t t = 0; t < n; ++t) {
        close_ticks[t] = bars[t].close;
        close[t] = bars[t].close * tick;
    }

    const auto fast = ema_series(close, static_cast<std::size_t>(p.macd_fast));
    const auto slow = ema_series(close, static_cast<std::size_t>(p.macd_slow));
    std::vector<double> macd(n, kMissing);
    for (std::size_t t = 0; t < n; ++t) {
        if (!is_missing(fast[t]) && !is_missing(slow[t])) macd[t] = fast[t] - slow[t];
    }
    const auto signal = ema_series(macd, static_cast<std::size_t>(p.macd_sign));
    const auto sma_fast = rolling_mean_ticks(close_ticks, static_cast<std::size_t>(p.sma_fast), 1, tick);
    const auto sma_slow = rolling_mean_ticks(close_ticks, static_cast<std::size_t>(p.sma_slow), 1, tick);
    for (std::size_t t = 0; t < n; ++t) {
        c.set(t, 0, macd[t]);
        c.set(t, 1, signal[t]);
        c.set(t, 2, is_missing(signal[t]) ? kMissing : macd[t] - signal[t]);
        c.set(t, 3, sma_fast[t]);
        c.set(t, 4, sma_slow[t]);
    }

    // Wilder RSI.
    const std::size_t rw = static_cast<std::size_t>(p.rsi_window);
    std::vector<double> rsi(n, kMissing);
    double avg_gain = 0, avg_loss = 0;
    for (std::size_t t = 1; t < n; ++t) {
        const double d = close[t] - close[t - 1];
        const double gain = d > 0 ? d : 0.0, loss = d < 0 ? -d : 0.0;
        if (t <= rw) {
            avg_gain += gain / static_cast<double>(rw);
            avg_loss += loss / static_cast<double>(rw);
            if (t < rw) continue;
        } else {
            avg_gain = (avg_gain * static_cast<double>(rw - 1) + gain) / static_cast<double>(rw);
            avg_loss = (avg_loss * static_cast<double>(rw - 1) + loss) / static_cast<double>(rw);
        }
        if (avg_loss == 0.0) {
            rsi[t] = avg_gain == 0.0 ? 50.0 : 100.0;
        } else {
            rsi[t] = 100.0 - 100.0 / (1.0 + avg_gain / avg_loss);
        }
    }

    const std::size_t sw = static_cast<std::size_t>(p.stoch_window);
    std::vector<double> stoch(n, kMissing);
    for (std::size_t t = 0; t < n; ++t) {
        if (t + 1 < sw || is_missing(rsi[t]) || is_missing(rsi[t + 1 - sw])) continue;
        double lo = rsi[t], hi = rsi[t];
        for (std::size_t j = t + 1 - sw; j <= t; ++j) {
            lo = std::min(lo, rsi[j]);
            hi = std::max(hi, rsi[j]);
        }
        if (hi > lo) {
            stoch[t] = (rsi[t] - lo) / (hi - lo);
        } else {
            stoch[t] = 0.5;
            c.flag(t, kFlagFlatRsi);
        }
    }
    const auto k = rolling_mean(stoch, static_cast<std::size_t>(p.smooth_k));
    const auto d = rolling_mean(k, static_cast<std::size_t>(p.smooth_d));
    for (std::size_t t = 0; t < n; ++t) {
        c.set(t, 5, stoch[t]);
        c.set(t, 6, k[t]);
        c.set(t, 7, d[t]);
    }
    return std::move(c.frame);
}

FeatureFrame compute_indicators(std::span<const OhlcvBar> bars, const TickScale& scale, const TaParams& p) {
    FeatureFrame frame = compute_volume_indicators(bars, scale, p);
    frame.append_columns(compute_volatility_indicators(bars, scale, p));
    frame.append_columns(compute_trend_momentum(bars, scale, p));
    for (std::size_t t = 0; t < bars.size(); ++t) {
        if (bars[t].short_bar) frame.flags[t] |= kFlagShortBar;
    }
    return frame;
}

std::vector<std::ptrdiff_t> aligned_bar_index(std::span<const OhlcvBar> bars, std::size_t n_snapshots) {
    std::vector<std::ptrdiff_t> out(n_snapshots, -1);
    std::ptrdiff_t current = -1;
    std::size_t next_bar = 0;
    for (std::size_t j = 0; j < n_snapshots; ++j) {
        // A bar is usable from the snapshot after its last one.
        while (next_bar < bars.size() && bars[next_bar].first_index + bars[next_bar].count <= j) {
            current = static_cast<std::ptrdiff_t>(next_bar);
            ++next_bar;
        }
        out[j] = current;
    }
    return out;
}

FeatureFrame align_to_snapshots(const FeatureFrame& bar_frame, std::span<const OhlcvBar> bars,
                                std::size_t n_snapshots) {
    FeatureFrame out(bar_frame.names, n_snapshots);
    const auto idx = aligned_bar_index(bars, n_snapshots);
    const std::size_t cols = bar_frame.cols();
    for (std::size_t j = 0; j < n_snapshots; ++j) {
        if (idx[j] < 0) continue;
        const auto b = static_cast<std::size_t>(idx[j]);
        std::copy_n(bar_frame.values.begin() + static_cast<std::ptrdiff_t>(b * cols), cols,
                    out.values.begin() + static_cast<std::ptrdiff_t>(j * cols));
        out.flags[j] = bar_frame.flags[b];
    }
    return out;
}

FeatureFrame session_features(const Session& session, std::span<const preprocess::DerivedSnapshot> derived,
                              const FeatureConfig& cfg) {
    const auto bars = preprocess::build_bars(session, derived, static_cast<std::size_t>(cfg.bar_snapshots));
    const auto frame = compute_indicators(bars, session.scale, cfg.ta);
    return align_to_snapshots(frame, bars, session.size());
}

}  // namespace snapdir::ta
