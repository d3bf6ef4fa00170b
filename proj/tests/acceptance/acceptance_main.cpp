// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when all pass.

#include "fixtures.hpp"
#include "oracles.hpp"

#include "snapdir/backtest.hpp"
#include "snapdir/calendar.hpp"
#include "snapdir/dataset.hpp"
#include "snapdir/digest.hpp"
#include "snapdir/feed.hpp"
#include "snapdir/labeling.hpp"
#include "snapdir/metrics.hpp"
#include "snapdir/micro_features.hpp"
#include "snapdir/model.hpp"
#include "snapdir/pipeline.hpp"
#include "snapdir/preprocess.hpp"
#include "snapdir/synthetic.hpp"
#include "snapdir/ta_features.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace snapdir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Check {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
};

std::string fmt(const char* f, double a) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

// Registry audit against the expected indicator and microstructure column sets.
Outcome feature_count_parity() {
    const int windows[] = {5, 10, 15, 30};
    const auto micro_names = micro::feature_names(windows);
    std::size_t spread = 0, imb = 0, type = 0, flow = 0;
    for (const auto& n : micro_names) {
        if (n.rfind("acc_spread_", 0) == 0) ++spread;
        else if (n.rfind("acc_imb_", 0) == 0) ++imb;
        else if (n.rfind("type", 0) == 0) ++type;
        else if (n.rfind("open_close_pct_", 0) == 0 || n.rfind("oi_ratio_", 0) == 0) ++flow;
    }
    const std::set<std::string> expected_ta = {
        "volume_adi", "volume_obv", "volume_cmf", "volume_fi", "volume_em", "volume_vpt",
        "volatility_bbh", "volatility_bbl", "volatility_bbm", "volatility_bbp", "volatility_bbw",
        "volatility_kcc", "volatility_kch", "volatility_kcl", "volatility_kcp", "volatility_kcw",
        "volatility_dch", "volatility_dcl", "volatility_dcm", "volatility_dcp", "volatility_dcw",
        "trend_macd", "trend_macd_signal", "trend_macd_diff", "trend_sma_fast", "trend_sma_slow",
        "momentum_stoch_rsi", "momentum_stoch_rsi_k", "momentum_stoch_rsi_d"};
    std::set<std::string> ta_names;
    for (const auto& spec : ta::indicator_registry()) ta_names.insert(spec.name);
    const std::set<std::string> all_micro(micro_names.begin(), micro_names.end());
    const bool ok = spread == 20 && imb == 20 && type == 32 && flow == 8 && micro_names.size() == 80 &&
                    all_micro.size() == 80 && ta_names == expected_ta && ta::indicator_registry().size() == 29;
    std::ostringstream d;
    d << "spread=" << spread << " imbalance=" << imb << " type=" << type << " order_flow=" << flow
      << " ta=" << ta_names.size();
    return {ok, d.str()};
}

Outcome open_close_exactness() {
    SynthParams p;
    p.n_snapshots = 1'000'000;
    p.session_snapshots = 25'000;
    p.seed = 11;
    const auto feed = synth::generate_synthetic_feed(p, {});
    std::size_t mismatches = 0, conservation_failures = 0, n = 0;
    for (std::size_t s = 0; s < feed.sessions.size(); ++s) {
        const auto& session = feed.sessions[s];
        const auto d = preprocess::derive_deltas(session);
        std::int64_t volume = 0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            const auto& planted = feed.planted[s][i];
            if (d[i].flow.open_halves != 2 * planted.open || d[i].flow.close_halves != 2 * planted.close ||
                d[i].flow.inconsistent) {
                ++mismatches;
            }
            volume += d[i].volume_chg;
            ++n;
        }
        if (volume != session.snapshots.back().volume) ++conservation_failures;
    }
    std::ostringstream d;
    d << n << " snapshots, " << mismatches << " flow mismatches, " << conservation_failures
      << " sessions violating volume conservation";
    return {n == 1'000'000 && mismatches == 0 && conservation_failures == 0, d.str()};
}

Outcome streaming_equals_batch() {
    SynthParams p;
    p.n_snapshots = 200'000;
    p.session_snapshots = 200'000;
    p.seed = 12;
    const auto feed = synth::generate_synthetic_feed(p, {});
    const auto& s = feed.sessions.at(0);
    if (s.size() != 200'000) return {false, "synthetic session has " + std::to_string(s.size()) + " snapshots"};
    const auto d = preprocess::derive_deltas(s);
    FeatureConfig cfg;
    const auto micro_frame = micro::session_features(d, cfg, s.scale);
    const auto ta_frame = ta::session_features(s, d, cfg);
    const auto bars = preprocess::build_bars(s, d, cfg.bar_snapshots);

    std::vector<double> high, low, close;
    for (const auto& b : bars) {
        high.push_back(static_cast<double>(b.high));
        low.push_back(static_cast<double>(b.low));
        close.push_back(static_cast<double>(b.close));
    }
    const double tick = s.scale.tick_size();
    std::mt19937_64 rng(13);
    std::size_t checked = 0, exact_fail = 0, ema_fail = 0;
    double worst_ema = 0;
    const std::size_t n = s.size();
    const auto bar_len = static_cast<std::size_t>(cfg.bar_snapshots);
    for (int k = 0; k < 1000; ++k) {
        const std::size_t i = 30 * 120 + rng() % (n - 30 * 120);
        for (std::size_t wi = 0; wi < cfg.window_minutes.size(); ++wi) {
            const int m = cfg.window_minutes[wi];
            const auto w = static_cast<std::size_t>(m) * 120;
            for (int lvl = 1; lvl <= 5; ++lvl) {
                std::int64_t sp = 0, im = 0;
                for (std::size_t j = i + 1 - w; j <= i; ++j) {
                    sp += oracle::spread_ticks(s.snapshots[j], lvl);
                    im += oracle::imbalance(s.snapshots[j], lvl);
                }
                const auto suffix = "_k" + std::to_string(lvl) + "_m" + std::to_string(m);
                exact_fail += micro_frame.at(i, micro_frame.index_of("acc_spread" + suffix)) !=
                              static_cast<double>(sp) / static_cast<double>(w) * tick;
                exact_fail += micro_frame.at(i, micro_frame.index_of("acc_imb" + suffix)) !=
                              static_cast<double>(im) / static_cast<double>(w);
                checked += 2;
            }
            for (int t = 1; t <= 4; ++t) {
                const auto suffix = "_m" + std::to_string(m);
                const auto base = "type" + std::to_string(t);
                exact_fail += micro_frame.at(i, micro_frame.index_of(base + "_pct" + suffix)) !=
                              oracle::type_share(s.snapshots, i, w, t);
                exact_fail += micro_frame.at(i, micro_frame.index_of(base + "_pctf" + suffix)) !=
                              oracle::type_share(s.snapshots, i, w, t, cfg.filter_threshold);
                checked += 2;
            }
        }
        // Snapshot i sees the last bar that ended strictly before it.
        const std::size_t b = i / bar_len - 1;
        if (b + 1 >= 20) {
            exact_fail += ta_frame.at(i, ta_frame.index_of("volatility_dch")) != oracle::window_max(high, b, 20) * tick;
            exact_fail += ta_frame.at(i, ta_frame.index_of("volatility_dcl")) != oracle::window_min(low, b, 20) * tick;
            checked += 2;
        }
        if (b >= 33) {
            const double fast = oracle::ema_closed_form(close, 0, 12, b), slow = oracle::ema_closed_form(close, 0, 26, b);
            const double level = close[b];
            const double err = std::abs(ta_frame.at(i, ta_frame.index_of("trend_macd")) - (fast - slow) * tick) /
                               (level * tick);
            worst_ema = std::max(worst_ema, err);
            ema_fail += err > 1e-12;
            checked += 1;
        }
    }
    std::ostringstream det;
    det << checked << " values at 1000 indices, " << exact_fail << " exact mismatches, worst EMA relative error "
        << worst_ema;
    return {exact_fail == 0 && ema_fail == 0, det.str()};
}

FeatureFrame all_features(const Session& s, const FeatureConfig& cfg) {
    const auto d = preprocess::derive_deltas(s);
    auto frame = ta::session_features(s, d, cfg);
    frame.append_columns(micro::session_features(d, cfg, s.scale));
    return frame;
}

Outcome no_lookahead() {
    SynthParams p;
    p.n_snapshots = 20'000;
    p.session_snapshots = 20'000;
    p.seed = 14;
    const auto feed = synth::generate_synthetic_feed(p, {});
    const auto& s = feed.sessions.at(0);
    FeatureConfig cfg;
    const auto full = all_features(s, cfg);
    std::mt19937_64 rng(15);
    std::size_t mismatches = 0, defined = 0;
    for (int k = 0; k < 200; ++k) {
        const std::size_t i = rng() % s.size();
        const std::size_t c = rng() % full.cols();
        const auto prefix = feed::make_session(
            std::vector<Snapshot>(s.snapshots.begin(), s.snapshots.begin() + static_cast<std::ptrdiff_t>(i) + 1), FeedConfig{});
        const auto part = all_features(prefix, cfg);
        mismatches += !same(part.at(i, c), full.at(i, c));
        defined += !std::isnan(full.at(i, c));
    }
    std::ostringstream det;
    det << "200 (feature, index) pairs, " << defined << " defined, " << mismatches << " mismatches";
    return {mismatches == 0, det.str()};
}

Outcome purged_split_guard() {
    SynthParams p;
    p.session_snapshots = 3000;
    p.n_snapshots = 60 * 3000;
    p.seed = 16;
    const auto feed = synth::generate_synthetic_feed(p, {});
    const LabelConfig lcfg;
    const int offset = FeedConfig{}.utc_offset_minutes;
    const std::int64_t horizon_ms = lcfg.horizon * 500;

    std::vector<std::int32_t> days;
    for (const auto& s : feed.sessions) days.push_back(s.trading_day);
    const auto groups = dataset::distinct_groups(days);
    const auto folds = dataset::purged_group_split(groups, 5, 1);
    std::size_t violations = 0, rows_checked = 0;
    for (const auto& f : folds) {
        const std::set<std::int32_t> train(f.train_groups.begin(), f.train_groups.end());
        const std::set<std::int32_t> val(f.validation_groups.begin(), f.validation_groups.end());
        if (!(*train.rbegin() < *val.begin())) ++violations;
        for (const auto& s : feed.sessions) {
            if (!train.count(s.trading_day)) continue;
            for (const auto& x : s.snapshots) {
                // Rolling windows and EMAs restart per session, so the lookback reaches back
                // at most to the session start.
                const auto lo = local_yyyymmdd(s.start_ms, offset);
                const auto hi = local_yyyymmdd(x.timestamp_ms + horizon_ms, offset);
                for (auto v : val) violations += v >= lo && v <= hi;
                ++rows_checked;
            }
        }
    }
    std::ostringstream det;
    det << groups.size() << " days, " << folds.size() << " folds, " << rows_checked << " training rows, "
        << violations << " violations";
    return {groups.size() == 60 && folds.size() == 5 && violations == 0, det.str()};
}

Outcome metric_oracles() {
    std::mt19937_64 rng(17);
    std::size_t auc_fail = 0;
    for (int k = 0; k < 100; ++k) {
        const std::size_t n = 2 + rng() % 199;
        std::vector<double> p(n);
        std::vector<std::int8_t> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = static_cast<double>(rng() % 50) / 50.0;
            y[i] = static_cast<std::int8_t>(rng() & 1);
        }
        y[0] = 0;
        y[1] = 1;
        auc_fail += metrics::auc_roc(p, y) != oracle::pairwise_auc(p, y);
    }
    std::uniform_real_distribution<double> u(0, 1);
    std::size_t ens_fail = 0;
    for (int k = 0; k < 1000; ++k) {
        double v[5];
        for (auto& x : v) x = u(rng);
        const double direct = (v[0] + v[1] + v[2] + v[3] + v[4] - *std::max_element(v, v + 5) -
                               *std::min_element(v, v + 5)) / 3.0;
        ens_fail += metrics::trimmed_mean(v) != direct;
    }
    const double x[] = {1, 2, 3}, up[] = {2, 4, 6}, down[] = {6, 4, 2}, half[] = {1, 3, 2};
    const bool pearson_ok = std::abs(dataset::pearson(x, up) - 1.0) <= 1e-12 &&
                            std::abs(dataset::pearson(x, down) + 1.0) <= 1e-12 &&
                            std::abs(dataset::pearson(x, half) - 0.5) <= 1e-12;
    std::ostringstream det;
    det << "auc mismatches " << auc_fail << "/100, ensemble mismatches " << ens_fail << "/1000, pearson "
        << (pearson_ok ? "ok" : "off");
    return {auc_fail == 0 && ens_fail == 0 && pearson_ok, det.str()};
}

struct Scores {
    double auc = 0, accuracy = 0;
};

// Five purged folds on the cross-validation days, then the trimmed-mean ensemble on the
// held-out tail.
Scores purged_ensemble(const dataset::FeatureMatrix& m) {
    const auto plan = dataset::holdout_split(dataset::distinct_groups(m.groups), 0.2, 1);
    const auto folds = dataset::purged_group_split(plan.cv_groups, 5, 1);
    const auto test = m.select_rows(m.rows_in_groups(plan.test_groups));
    std::vector<std::vector<double>> probs(folds.size());
    pipeline::parallel_for(folds.size(), 1, [&](std::size_t k) {
        auto train_groups = folds[k].train_groups;
        std::sort(train_groups.begin(), train_groups.end());
        const auto train = m.select_rows(m.rows_in_groups(train_groups));
        const auto h = model::fit_baseline(train, TrainConfig{}, 0, folds[k].fold_index);
        probs[k] = model::predict(h, test);
    });
    const auto ens = metrics::ensemble(probs);
    return {metrics::auc_roc(ens, test.labels), metrics::classification_report(ens, test.labels).accuracy};
}

Outcome baseline_recovery() {
    synth::PlantedMatrixSpec spec;
    const auto planted = purged_ensemble(synth::make_planted_matrix(spec).matrix);
    spec.noise_labels = true;
    spec.seed = 8;
    const auto noise = purged_ensemble(synth::make_planted_matrix(spec).matrix);
    std::ostringstream det;
    det << "planted auc " << planted.auc << " accuracy " << planted.accuracy << ", noise auc " << noise.auc;
    return {planted.auc > 0.9 && planted.accuracy > 0.80 && std::abs(noise.auc - 0.5) <= 0.05, det.str()};
}

Outcome state_machine() {
    using A = backtest::Action;
    using P = backtest::Position;
    const double eps = std::numeric_limits<double>::epsilon();
    const double ys[] = {0.0, 0.24, 0.26, 0.5 - eps, 0.5, 0.5 + eps, 0.74, 0.76, 1.0};
    const A table[3][9] = {
        {A::OpenShort, A::OpenShort, A::Hold, A::Hold, A::Hold, A::Hold, A::Hold, A::OpenLong, A::OpenLong},
        {A::CloseLong, A::CloseLong, A::CloseLong, A::CloseLong, A::CloseLong, A::Hold, A::Hold, A::Hold, A::Hold},
        {A::Hold, A::Hold, A::Hold, A::Hold, A::CloseShort, A::CloseShort, A::CloseShort, A::CloseShort, A::CloseShort}};
    const P positions[] = {P::Flat, P::Long, P::Short};
    std::size_t wrong = 0;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 9; ++c) wrong += backtest::decide(positions[r], ys[c], 0.25) != table[r][c];
    }
    std::vector<backtest::DecisionPoint> pts;
    const double probs[] = {0.8, 0.6, 0.4, 0.2, 0.6};
    for (int k = 0; k < 5; ++k) pts.push_back({fixtures::t0() + k * 900'000, 20210104, probs[k], 100.0 + k});
    const auto curve = backtest::run_backtest(pts, BacktestConfig{});
    const bool log_ok = curve.trades.size() == 4 && curve.trades[0].action == "open" &&
                        curve.trades[0].side == P::Long && curve.trades[0].timestamp_ms == pts[0].timestamp_ms &&
                        curve.trades[1].action == "close" && curve.trades[1].timestamp_ms == pts[2].timestamp_ms &&
                        curve.trades[2].action == "open" && curve.trades[2].side == P::Short &&
                        curve.trades[2].timestamp_ms == pts[3].timestamp_ms && curve.trades[3].action == "close" &&
                        curve.trades[3].timestamp_ms == pts[4].timestamp_ms;
    std::ostringstream det;
    det << wrong << "/27 transitions wrong, crafted sequence " << curve.trades.size() << " trades"
        << (log_ok ? " as expected" : " unexpected");
    return {wrong == 0 && log_ok, det.str()};
}

Outcome accounting() {
    backtest::StrategyState s;
    s.equity = 1'000'000.0;
    s = backtest::decision_step(s, 1.0, 5000.0).state;
    s = backtest::decision_step(s, 0.0, 5050.0).state;
    const bool leverage_ok = s.equity == 1'000'000.0 * 1.10;

    const double e[] = {100, 120, 90, 110};
    const bool dd_ok = backtest::max_drawdown(e) == 0.25;

    const double by_day[] = {100.5, 101.7, 99.8, 102.2, 103.1, 102.4, 104.9, 104.0, 106.3, 107.1};
    backtest::EquityCurve curve;
    curve.initial_equity = 100.0;
    for (int d = 0; d < 10; ++d) curve.points.push_back({fixtures::t0() + d * kMsPerDay, 20210104 + d, by_day[d]});
    const double sharpe = backtest::performance_metrics(curve).sharpe;
    const double want = oracle::sharpe_direct(by_day, 100.0);
    const bool sharpe_ok = std::abs(sharpe - want) <= 1e-9;
    std::ostringstream det;
    det << "equity " << fmt("%.10g", s.equity) << ", drawdown " << backtest::max_drawdown(e) << ", sharpe "
        << fmt("%.12g", sharpe) << " vs " << fmt("%.12g", want);
    return {leverage_ok && dd_ok && sharpe_ok, det.str()};
}

std::map<std::string, std::string> digests(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = digest::sha256_file(e.path());
    }
    return out;
}

Outcome determinism_and_throughput() {
    fixtures::TempDir a("accept_a"), b("accept_b");
    std::ostringstream log;
    double pipeline_s = 0;
    for (const auto* dir : {&a, &b}) {
        PipelineConfig cfg;
        cfg.work_dir = dir->path.string();
        const auto t = std::chrono::steady_clock::now();
        pipeline::Runner(cfg, log).run_all();
        pipeline_s = std::max(pipeline_s, std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count());
    }
    const auto da = digests(a.path), db = digests(b.path);
    const bool identical = da == db && da.size() > 20;

    SynthParams p;
    p.n_snapshots = 200'000;
    p.session_snapshots = 200'000;
    p.seed = 18;
    const auto feed = synth::generate_synthetic_feed(p, {});
    const auto& s = feed.sessions.at(0);
    micro::MicroFeatureEngine engine(FeatureConfig{}, s.scale);
    double checksum = 0;
    const std::size_t passes = (10'000'000 + s.size() - 1) / s.size();
    const auto t = std::chrono::steady_clock::now();
    for (std::size_t k = 0; k < passes; ++k) {
        engine.reset();
        preprocess::DeltaDeriver deriver;
        for (const auto& x : s.snapshots) checksum += engine.push(deriver.next(x))[0];
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
    const double rate = static_cast<double>(passes * s.size()) / secs;
    std::ostringstream det;
    det << da.size() << " artifacts " << (identical ? "identical" : "DIFFER") << ", slowest pipeline run "
        << fmt("%.1f s", pipeline_s) << ", micro engine " << fmt("%.0f", rate) << " snapshots/s over "
        << passes * s.size() << (std::isnan(checksum) ? "" : "");
    return {identical && pipeline_s < 300.0 && rate >= 100'000.0 && passes * s.size() >= 10'000'000, det.str()};
}

}  // namespace

int main() {
    const std::vector<Check> checks = {
        {1, "feature-count parity", 1.0, feature_count_parity},
        {2, "open/close exactness", 10.0, open_close_exactness},
        {3, "streaming equals batch", 60.0, streaming_equals_batch},
        {4, "no lookahead", 60.0, no_lookahead},
        {5, "purged split leakage guard", std::numeric_limits<double>::infinity(), purged_split_guard},
        {6, "metric oracles", std::numeric_limits<double>::infinity(), metric_oracles},
        {7, "baseline model recovery", 300.0, baseline_recovery},
        {8, "strategy state machine", std::numeric_limits<double>::infinity(), state_machine},
        {9, "accounting", std::numeric_limits<double>::infinity(), accounting},
        {10, "determinism and throughput", 600.0, determinism_and_throughput},
    };
    int failed = 0;
    for (const auto& c : checks) {
        Outcome o;
        const auto t = std::chrono::steady_clock::now();
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
        const bool in_time = secs < c.budget_s;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::printf("criterion %2d %-28s %s  %s; %.2f s%s\n", c.id, c.name, pass ? "PASS" : "FAIL", o.detail.c_str(),
                    secs, in_time ? "" : " (over time budget)");
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
