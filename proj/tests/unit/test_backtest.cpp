#include "fixtures.hpp"
#include "oracles.hpp"

#include "snapdir/backtest.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace snapdir;
using namespace snapdir::backtest;

namespace {

std::vector<DecisionPoint> points_of(std::initializer_list<double> probs, std::initializer_list<double> prices) {
    std::vector<DecisionPoint> pts;
    auto pr = prices.begin();
    std::int64_t t = fixtures::t0();
    for (double p : probs) {
        pts.push_back(DecisionPoint{t, 20210104, p, *pr++});
        t += 15 * 60'000;
    }
    return pts;
}

}  // namespace

TEST(StateMachine, ExhaustiveTransitionTable) {
    const double eps = std::numeric_limits<double>::epsilon();
    const double ys[] = {0.0, 0.24, 0.26, 0.5 - eps, 0.5, 0.5 + eps, 0.74, 0.76, 1.0};
    using A = Action;
    // Hand trace of the threshold rule with gamma = 0.25, one row per position.
    const A flat[] = {A::OpenShort, A::OpenShort, A::Hold, A::Hold, A::Hold, A::Hold, A::Hold, A::OpenLong, A::OpenLong};
    const A lng[] = {A::CloseLong, A::CloseLong, A::CloseLong, A::CloseLong, A::CloseLong, A::Hold, A::Hold, A::Hold, A::Hold};
    const A sht[] = {A::Hold, A::Hold, A::Hold, A::Hold, A::CloseShort, A::CloseShort, A::CloseShort, A::CloseShort, A::CloseShort};
    for (std::size_t i = 0; i < std::size(ys); ++i) {
        EXPECT_EQ(decide(Position::Flat, ys[i], 0.25), flat[i]) << ys[i];
        EXPECT_EQ(decide(Position::Long, ys[i], 0.25), lng[i]) << ys[i];
        EXPECT_EQ(decide(Position::Short, ys[i], 0.25), sht[i]) << ys[i];
    }
}

TEST(StateMachine, StepRejectsOutOfRangePrediction) {
    EXPECT_THROW(decision_step(StrategyState{}, 1.2, 100.0), std::invalid_argument);
    EXPECT_THROW(decision_step(StrategyState{}, std::nan(""), 100.0), std::invalid_argument);
}

TEST(Accounting, OnePercentMoveAtTenPercentMargin) {
    StrategyState s;
    s.equity = 1'000'000.0;
    s = decision_step(s, 0.9, 5000.0).state;
    EXPECT_EQ(s.position, Position::Long);
    s = decision_step(s, 0.1, 5050.0).state;
    EXPECT_EQ(s.position, Position::Flat);
    EXPECT_EQ(s.equity, 1'100'000.0);

    StrategyState sh;
    sh.equity = 1.0;
    sh = decision_step(sh, 0.1, 5000.0).state;
    sh = decision_step(sh, 0.9, 5050.0).state;
    EXPECT_DOUBLE_EQ(sh.equity, 0.9);
}

TEST(Backtest, CraftedSequenceFourTrades) {
    const auto pts = points_of({0.8, 0.6, 0.4, 0.2, 0.6}, {100, 101, 102, 101, 100});
    const auto curve = run_backtest(pts, BacktestConfig{});
    ASSERT_EQ(curve.trades.size(), 4u);
    EXPECT_EQ(curve.trades[0].action, "open");
    EXPECT_EQ(curve.trades[0].side, Position::Long);
    EXPECT_EQ(curve.trades[0].timestamp_ms, pts[0].timestamp_ms);
    EXPECT_EQ(curve.trades[1].action, "close");
    EXPECT_EQ(curve.trades[1].timestamp_ms, pts[2].timestamp_ms);
    EXPECT_EQ(curve.trades[2].action, "open");
    EXPECT_EQ(curve.trades[2].side, Position::Short);
    EXPECT_EQ(curve.trades[2].timestamp_ms, pts[3].timestamp_ms);
    EXPECT_EQ(curve.trades[3].action, "close");
    EXPECT_EQ(curve.trades[3].timestamp_ms, pts[4].timestamp_ms);

    const double after_long = 1e6 * (1 + (102.0 - 100.0) / (100.0 * 0.1));
    EXPECT_DOUBLE_EQ(curve.trades[1].equity_after, after_long);
    EXPECT_DOUBLE_EQ(curve.points.back().equity, after_long * (1 + (101.0 - 100.0) / (101.0 * 0.1)));
}

TEST(Backtest, NeutralPredictionsNeverTrade) {
    const auto pts = points_of({0.5, 0.5, 0.5, 0.5}, {100, 110, 90, 100});
    const auto curve = run_backtest(pts, BacktestConfig{});
    EXPECT_TRUE(curve.trades.empty());
    for (const auto& p : curve.points) EXPECT_EQ(p.equity, 1e6);
}

TEST(Backtest, LastPointForceCloses) {
    const auto pts = points_of({0.9, 0.9, 0.9}, {100, 100, 101});
    const auto curve = run_backtest(pts, BacktestConfig{});
    ASSERT_EQ(curve.trades.size(), 2u);
    EXPECT_EQ(curve.trades.back().action, "close");
    EXPECT_EQ(curve.points.back().position, Position::Flat);
}

TEST(Backtest, MarksOpenPositions) {
    const auto pts = points_of({0.9, 0.9, 0.9}, {100, 99, 101});
    const auto curve = run_backtest(pts, BacktestConfig{});
    EXPECT_DOUBLE_EQ(curve.points[1].equity, 1e6 * (1 - 0.01 / 0.1));
    EXPECT_EQ(curve.points[1].position, Position::Long);
}

TEST(Backtest, LiquidationStopsRun) {
    const auto pts = points_of({0.9, 0.9, 0.9, 0.9}, {100, 95, 89, 120});
    const auto curve = run_backtest(pts, BacktestConfig{});
    EXPECT_TRUE(curve.liquidated);
    EXPECT_EQ(curve.points.back().equity, 0.0);
    EXPECT_EQ(curve.points.size(), 3u);
    EXPECT_EQ(curve.trades.back().action, "liquidate");
}

TEST(Backtest, FeesAndSlippageReduceEquity) {
    const auto pts = points_of({0.9, 0.1}, {100, 100});
    BacktestConfig cfg;
    cfg.fee_rate = 0.001;
    cfg.slippage_ticks = 1;
    const auto curve = run_backtest(pts, cfg, 0.5);
    // Buy at 100.5, sell at 99.5, fee of 1 % of equity per fill at 10x notional.
    const double expected = 1e6 * (1 - 0.01) * (1 + (99.5 - 100.5) / (100.5 * 0.1)) * (1 - 0.01);
    EXPECT_NEAR(curve.points.back().equity, expected, 1e-6);
}

TEST(Backtest, RejectsUnorderedPoints) {
    auto pts = points_of({0.5, 0.5}, {100, 100});
    pts[1].timestamp_ms = pts[0].timestamp_ms;
    EXPECT_THROW(run_backtest(pts, BacktestConfig{}), std::invalid_argument);
}

TEST(Metrics, DrawdownExample) {
    const double e[] = {100, 120, 90, 110};
    EXPECT_EQ(max_drawdown(e), 0.25);
    EXPECT_EQ(max_drawdown(e), oracle::max_drawdown_pairs(e));
}

TEST(Metrics, SharpeOnTenDayCurve) {
    const double by_day[] = {101, 103, 102, 104, 104.5, 103, 106, 107, 106.5, 108};
    EquityCurve curve;
    curve.initial_equity = 100;
    for (int d = 0; d < 10; ++d) {
        // Two marks per day; only the last one of each day counts.
        curve.points.push_back(CurvePoint{fixtures::t0() + d * 86'400'000, 20210104 + d, 99.0, Position::Flat, 0});
        curve.points.push_back(CurvePoint{fixtures::t0() + d * 86'400'000 + 1, 20210104 + d, by_day[d], Position::Flat, 0});
    }
    const auto m = performance_metrics(curve);
    EXPECT_TRUE(m.sharpe_defined);
    EXPECT_NEAR(m.sharpe, oracle::sharpe_direct(by_day, 100), 1e-9);
    EXPECT_EQ(m.trading_days, 10u);
    EXPECT_NEAR(m.total_return, 0.08, 1e-15);
}

TEST(Metrics, SharpeUndefinedCases) {
    const double one[] = {0.01};
    EXPECT_THROW(annualized_sharpe(one), std::domain_error);
    const double flat[] = {0.01, 0.01, 0.01};
    EXPECT_THROW(annualized_sharpe(flat), std::domain_error);
    EquityCurve curve;
    curve.initial_equity = 1;
    curve.points.push_back(CurvePoint{0, 20210104, 1.0, Position::Flat, 0});
    const auto m = performance_metrics(curve);
    EXPECT_FALSE(m.sharpe_defined);
    EXPECT_TRUE(std::isnan(m.sharpe));
}

TEST(Grid, ClockAlignedMarks) {
    dataset::FeatureMatrix rows;
    rows.columns = {"f"};
    rows.session_ids = {"ag.20210104.0900"};
    const std::int64_t start = fixtures::t0() + 7 * 60'000;  // 09:07 local
    std::vector<double> probs;
    for (int i = 0; i < 60 * 120; ++i) {  // one hour at 500 ms
        rows.session_of_row.push_back(0);
        rows.timestamps.push_back(start + i * 500);
        rows.groups.push_back(20210104);
        rows.prices.push_back(100.0 + i);
        rows.values.push_back(0.0);
        probs.push_back(static_cast<double>(i % 100) / 100.0);
    }
    const auto pts = decision_grid(rows, probs, 15, 480);
    ASSERT_EQ(pts.size(), 4u);  // 09:15, 09:30, 09:45, 10:00
    for (std::size_t k = 0; k < pts.size(); ++k) {
        EXPECT_EQ(pts[k].timestamp_ms, fixtures::t0() + static_cast<std::int64_t>(15 * (k + 1)) * 60'000);
        const auto i = static_cast<std::size_t>((pts[k].timestamp_ms - start) / 500);
        EXPECT_EQ(pts[k].price, rows.prices[i]);
        EXPECT_EQ(pts[k].prob, probs[i]);
    }
}

TEST(Csv, TradesAndEquityWritten) {
    const auto curve = run_backtest(points_of({0.8, 0.6, 0.4}, {100, 101, 102}), BacktestConfig{});
    std::ostringstream t, e;
    write_trades_csv(t, curve);
    write_equity_csv(e, curve);
    const auto trades = t.str(), equity = e.str();
    EXPECT_EQ(trades.substr(0, trades.find('\n')), "timestamp_ms,action,side,price,equity_after");
    EXPECT_EQ(std::count(equity.begin(), equity.end(), '\n'), 4);
}
