#include "fixtures.hpp"
#include "oracles.hpp"

#include "snapdir/feed.hpp"
#include "snapdir/ta_features.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace snapdir;
using preprocess::OhlcvBar;

namespace {

std::vector<OhlcvBar> random_bars(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> step(-6, 6), wick(0, 5), vol(0, 400);
    std::vector<OhlcvBar> bars;
    std::int64_t close = 5000;
    for (std::size_t i = 0; i < n; ++i) {
        OhlcvBar b;
        b.open = close;
        b.close = close + step(rng);
        b.high = std::max(b.open, b.close) + wick(rng);
        b.low = std::min(b.open, b.close) - wick(rng);
        b.volume = vol(rng);
        b.first_index = i * 120;
        b.count = 120;
        b.bar_start_ms = fixtures::t0() + static_cast<std::int64_t>(i) * 60'000;
        b.bar_end_ms = b.bar_start_ms + 59'500;
        bars.push_back(b);
        close = b.close;
    }
    return bars;
}

std::vector<OhlcvBar> constant_bars(std::size_t n, std::int64_t price) {
    auto bars = random_bars(n, 1);
    for (auto& b : bars) b.open = b.high = b.low = b.close = price;
    return bars;
}

double col(const FeatureFrame& f, const std::string& name, std::size_t row) { return f.at(row, f.index_of(name)); }

std::vector<double> closes(const std::vector<OhlcvBar>& bars) {
    std::vector<double> out;
    for (const auto& b : bars) out.push_back(static_cast<double>(b.close));
    return out;
}

void expect_rel(double got, double want, double tol, const std::string& what) {
    EXPECT_LE(std::abs(got - want), tol * std::max(1.0, std::abs(want))) << what << " got " << got << " want " << want;
}

}  // namespace

TEST(Registry, ColumnsPerFamily) {
    const auto reg = ta::indicator_registry();
    std::size_t counts[4] = {};
    for (const auto& spec : reg) ++counts[static_cast<int>(spec.family)];
    EXPECT_EQ(counts[0], 6u);
    EXPECT_EQ(counts[1], 15u);
    EXPECT_EQ(counts[2], 5u);
    EXPECT_EQ(counts[3], 3u);
    const auto frame = ta::compute_indicators(random_bars(5, 1), TickScale{});
    ASSERT_EQ(frame.cols(), reg.size());
    for (std::size_t i = 0; i < reg.size(); ++i) EXPECT_EQ(frame.names[i], reg[i].name);
}

TEST(Registry, DumpListsParameters) {
    std::ostringstream out;
    ta::dump_registry(out, ta::indicator_registry());
    EXPECT_NE(out.str().find("trend_macd\ttrend\twindow_slow=26\twindow_fast=12\twindow_sign=9"), std::string::npos);
    EXPECT_NE(out.str().find("volume_fi\tvolume\twindow=13"), std::string::npos);
}

TEST(VolumeIndicators, FlatBarContributesNothingToAdi) {
    auto bars = constant_bars(1, 5000);
    bars[0].volume = 50;
    const auto f = ta::compute_volume_indicators(bars, TickScale{});
    EXPECT_EQ(col(f, "volume_adi", 0), 0.0);
    EXPECT_NE(f.flags[0] & kFlagDegenerateBar, 0u);
}

TEST(VolumeIndicators, ObvAddsVolumeOnRisingClose) {
    auto bars = random_bars(2, 2);
    bars[1].close = bars[0].close + 3;
    bars[1].high = std::max(bars[1].high, bars[1].close);
    const auto f = ta::compute_volume_indicators(bars, TickScale{});
    EXPECT_EQ(col(f, "volume_obv", 1), col(f, "volume_obv", 0) + static_cast<double>(bars[1].volume));
}

TEST(VolumeIndicators, CmfMatchesWindowedQuotient) {
    const auto bars = random_bars(30, 3);
    const auto f = ta::compute_volume_indicators(bars, TickScale{});
    for (std::size_t t = 0; t < bars.size(); ++t) {
        if (t + 1 < 20) {
            EXPECT_TRUE(is_missing(col(f, "volume_cmf", t)));
            continue;
        }
        double num = 0, den = 0;
        for (std::size_t j = t - 19; j <= t; ++j) {
            const auto& b = bars[j];
            const double h = b.high, l = b.low, c = b.close;
            const double mfm = h > l ? ((c - l) - (h - c)) / (h - l) : 0.0;
            num += mfm * b.volume;
            den += b.volume;
        }
        expect_rel(col(f, "volume_cmf", t), num / den, 1e-12, "cmf");
    }
}

TEST(VolumeIndicators, ForceIndexIsEmaOfRawForce) {
    const auto bars = random_bars(80, 4);
    const auto f = ta::compute_volume_indicators(bars, TickScale{});
    std::vector<double> raw(bars.size(), 0.0);
    for (std::size_t t = 1; t < bars.size(); ++t) raw[t] = static_cast<double>(bars[t].close - bars[t - 1].close) * bars[t].volume;
    for (std::size_t t = 13; t < bars.size(); ++t) {
        expect_rel(col(f, "volume_fi", t), oracle::ema_closed_form(raw, 1, 13, t), 1e-9, "fi");
    }
    EXPECT_TRUE(is_missing(col(f, "volume_fi", 12)));
}

TEST(VolatilityIndicators, ConstantPriceCollapsesBands) {
    const auto f = ta::compute_volatility_indicators(constant_bars(40, 5000), TickScale{});
    for (std::size_t t = 19; t < 40; ++t) {
        EXPECT_EQ(col(f, "volatility_bbh", t), 5000.0);
        EXPECT_EQ(col(f, "volatility_bbl", t), 5000.0);
        EXPECT_EQ(col(f, "volatility_bbm", t), 5000.0);
        EXPECT_EQ(col(f, "volatility_bbw", t), 0.0);
        EXPECT_EQ(col(f, "volatility_bbp", t), 0.5);
        EXPECT_NE(f.flags[t] & kFlagFlatBand, 0u);
    }
}

TEST(VolatilityIndicators, DonchianOverRisingHighs) {
    auto bars = random_bars(20, 5);
    for (std::size_t i = 0; i < 20; ++i) {
        bars[i].high = static_cast<std::int64_t>(i + 1);
        bars[i].open = bars[i].close = bars[i].high;
        bars[i].low = 1;
    }
    bars[7].low = 0 + 1;
    const auto f = ta::compute_volatility_indicators(bars, TickScale{});
    EXPECT_EQ(col(f, "volatility_dch", 19), 20.0);
    EXPECT_EQ(col(f, "volatility_dcl", 19), 1.0);
    EXPECT_TRUE(is_missing(col(f, "volatility_dch", 18)));
}

TEST(VolatilityIndicators, AllBandsMatchBruteForce) {
    const auto bars = random_bars(100, 6);
    const auto scale = TickScale::parse("0.5");
    const double tick = 0.5;
    const auto f = ta::compute_volatility_indicators(bars, scale);
    std::vector<double> close, high, low, typical, range;
    for (const auto& b : bars) {
        close.push_back(b.close * tick);
        high.push_back(b.high * tick);
        low.push_back(b.low * tick);
        typical.push_back((b.high + b.low + b.close) * tick / 3.0);
        range.push_back((b.high - b.low) * tick);
    }
    for (std::size_t t = 0; t < bars.size(); ++t) {
        if (t >= 19) {
            const double mid = oracle::window_mean(close, t, 20), sd = oracle::window_pstd(close, t, 20);
            expect_rel(col(f, "volatility_bbm", t), mid, 1e-12, "bbm");
            expect_rel(col(f, "volatility_bbh", t), mid + 2 * sd, 1e-12, "bbh");
            expect_rel(col(f, "volatility_bbl", t), mid - 2 * sd, 1e-12, "bbl");
            expect_rel(col(f, "volatility_bbw", t), 4 * sd / mid * 100, 1e-9, "bbw");
            if (sd > 0) expect_rel(col(f, "volatility_bbp", t), (close[t] - (mid - 2 * sd)) / (4 * sd), 1e-9, "bbp");

            const double hi = oracle::window_max(high, t, 20), lo = oracle::window_min(low, t, 20);
            EXPECT_EQ(col(f, "volatility_dch", t), hi);
            EXPECT_EQ(col(f, "volatility_dcl", t), lo);
            EXPECT_EQ(col(f, "volatility_dcm", t), (hi + lo) / 2);
            expect_rel(col(f, "volatility_dcw", t), (hi - lo) / ((hi + lo) / 2) * 100, 1e-12, "dcw");
        } else {
            EXPECT_TRUE(is_missing(col(f, "volatility_bbm", t)));
        }
        if (t >= 9) {
            const double c = oracle::window_mean(typical, t, 10), r = oracle::window_mean(range, t, 10);
            expect_rel(col(f, "volatility_kcc", t), c, 1e-12, "kcc");
            expect_rel(col(f, "volatility_kch", t), c + r, 1e-12, "kch");
            expect_rel(col(f, "volatility_kcl", t), c - r, 1e-12, "kcl");
            expect_rel(col(f, "volatility_kcw", t), 2 * r / c * 100, 1e-9, "kcw");
        } else {
            EXPECT_TRUE(is_missing(col(f, "volatility_kcc", t)));
        }
    }
}

TEST(TrendMomentum, ConstantPrice) {
    const auto f = ta::compute_trend_momentum(constant_bars(80, 5000), TickScale{});
    for (std::size_t t = 40; t < 80; ++t) {
        EXPECT_EQ(col(f, "trend_macd", t), 0.0);
        EXPECT_EQ(col(f, "trend_macd_diff", t), 0.0);
        EXPECT_EQ(col(f, "trend_sma_fast", t), 5000.0);
        EXPECT_EQ(col(f, "trend_sma_slow", t), 5000.0);
        EXPECT_EQ(col(f, "momentum_stoch_rsi", t), 0.5);
        EXPECT_NE(f.flags[t] & kFlagFlatRsi, 0u);
    }
}

TEST(TrendMomentum, MacdFamilyMatchesClosedFormEma) {
    const auto bars = random_bars(200, 7);
    const auto f = ta::compute_trend_momentum(bars, TickScale{});
    const auto close = closes(bars);
    std::vector<double> macd(bars.size(), 0.0);
    for (std::size_t t = 25; t < bars.size(); ++t) {
        macd[t] = oracle::ema_closed_form(close, 0, 12, t) - oracle::ema_closed_form(close, 0, 26, t);
    }
    // Differences of EMAs are compared relative to the price level they are taken from.
    const double level = close[0];
    for (std::size_t t = 0; t < bars.size(); ++t) {
        if (t < 25) {
            EXPECT_TRUE(is_missing(col(f, "trend_macd", t)));
            continue;
        }
        EXPECT_LE(std::abs(col(f, "trend_macd", t) - macd[t]), 1e-12 * level) << t;
        if (t < 33) {
            EXPECT_TRUE(is_missing(col(f, "trend_macd_signal", t)));
            continue;
        }
        const double signal = oracle::ema_closed_form(macd, 25, 9, t);
        EXPECT_LE(std::abs(col(f, "trend_macd_signal", t) - signal), 1e-12 * level) << t;
        EXPECT_LE(std::abs(col(f, "trend_macd_diff", t) - (macd[t] - signal)), 1e-12 * level) << t;
    }
}

TEST(TrendMomentum, SmaMatchesWindowMean) {
    const auto bars = random_bars(60, 8);
    const auto f = ta::compute_trend_momentum(bars, TickScale{});
    const auto close = closes(bars);
    for (std::size_t t = 31; t < 60; ++t) {
        EXPECT_EQ(col(f, "trend_sma_fast", t), oracle::window_mean(close, t, 16));
        EXPECT_EQ(col(f, "trend_sma_slow", t), oracle::window_mean(close, t, 32));
    }
}

TEST(TrendMomentum, StochRsiBoundedAndSmoothed) {
    const auto bars = random_bars(120, 9);
    const auto f = ta::compute_trend_momentum(bars, TickScale{});
    for (std::size_t t = 0; t < bars.size(); ++t) {
        const double s = col(f, "momentum_stoch_rsi", t);
        if (is_missing(s)) continue;
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
    }
    for (std::size_t t = 40; t < bars.size(); ++t) {
        const double k = (col(f, "momentum_stoch_rsi", t) + col(f, "momentum_stoch_rsi", t - 1) +
                          col(f, "momentum_stoch_rsi", t - 2)) / 3.0;
        EXPECT_NEAR(col(f, "momentum_stoch_rsi_k", t), k, 1e-15);
    }
}

TEST(Align, LastCompletedBarRule) {
    const auto s = feed::make_session(fixtures::random_walk(360, 10), FeedConfig{});
    const auto d = preprocess::derive_deltas(s);
    const auto bars = preprocess::build_bars(s, d, 120);
    const auto idx = ta::aligned_bar_index(bars, s.size());
    EXPECT_EQ(idx[119], -1);  // bar 0 covers snapshots 0..119 and is usable from 120
    EXPECT_EQ(idx[120], 0);
    EXPECT_EQ(idx[239], 0);
    EXPECT_EQ(idx[240], 1);
    for (std::size_t j = 0; j < s.size(); ++j) {
        if (idx[j] >= 0) EXPECT_LT(bars[static_cast<std::size_t>(idx[j])].bar_end_ms, s.snapshots[j].timestamp_ms);
    }
}

TEST(Align, SessionFeaturesCopyBarRows) {
    const auto s = feed::make_session(fixtures::random_walk(120 * 40, 12), FeedConfig{});
    const auto d = preprocess::derive_deltas(s);
    FeatureConfig cfg;
    const auto bars = preprocess::build_bars(s, d, 120);
    const auto bar_frame = ta::compute_indicators(bars, s.scale, cfg.ta);
    const auto snap_frame = ta::session_features(s, d, cfg);
    ASSERT_EQ(snap_frame.rows, s.size());
    const auto idx = ta::aligned_bar_index(bars, s.size());
    for (std::size_t j = 0; j < s.size(); j += 37) {
        for (std::size_t c = 0; c < snap_frame.cols(); ++c) {
            const double v = snap_frame.at(j, c);
            if (idx[j] < 0) {
                EXPECT_TRUE(is_missing(v));
            } else {
                const double want = bar_frame.at(static_cast<std::size_t>(idx[j]), c);
                if (is_missing(want)) EXPECT_TRUE(is_missing(v));
                else EXPECT_EQ(v, want);
            }
        }
    }
}
