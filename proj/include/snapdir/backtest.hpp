#pragma once

#include "snapdir/config.hpp"
#include "snapdir/dataset.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace snapdir::backtest {

enum class Position : std::int8_t { Flat = 0, Long = 1, Short = -1 };
enum class Action { Hold, OpenLong, OpenShort, CloseLong, CloseShort };

std::string_view to_string(Position p) noexcept;
std::string_view to_string(Action a) noexcept;

/// Pure threshold rule: open only when confident, close as soon as the prediction reverses.
Action decide(Position position, double y_hat, double gamma) noexcept;

struct StrategyState {
    Position position = Position::Flat;
    double entry_price = 0.0;   // meaningful iff position != Flat
    double entry_equity = 0.0;  // equity at the open, base of the leveraged return
    double equity = 1.0;
    double gamma = 0.25;
    double margin_ratio = 0.10;
};

struct StepResult {
    StrategyState state;
    Action action = Action::Hold;
};

/// Leveraged return of a full-equity position: dir * (exit - entry) / (entry * margin).
double position_return(Position side, double entry_price, double exit_price, double margin_ratio) noexcept;

/// One decision at fill price `price`. Closing realizes the leveraged return on the equity
/// committed at the open. Throws std::invalid_argument when y_hat is outside [0, 1].
StepResult decision_step(const StrategyState& state, double y_hat, double price);

struct DecisionPoint {
    std::int64_t timestamp_ms = 0;
    std::int32_t day = 0;
    double prob = 0.5;
    double price = 0.0;
};

/// Clock-aligned decision marks every `interval_minutes` inside each session's row range;
/// each mark takes the latest row at or before it from the same session.
std::vector<DecisionPoint> decision_grid(const dataset::FeatureMatrix& rows, std::span<const double> probs,
                                         int interval_minutes, int utc_offset_minutes);

struct TradeRecord {
    std::int64_t timestamp_ms = 0;
    std::string_view action;  // "open", "close" or "liquidate"
    Position side = Position::Flat;
    double price = 0.0;
    double equity_after = 0.0;
};

struct CurvePoint {
    std::int64_t timestamp_ms = 0;
    std::int32_t day = 0;
    double equity = 0.0;
    Position position = Position::Flat;
    double mark_price = 0.0;
};

struct EquityCurve {
    double initial_equity = 0.0;
    std::vector<CurvePoint> points;
    std::vector<TradeRecord> trades;
    bool liquidated = false;
};

/// Runs the strategy over time-ordered decision points. Open positions are marked at every
/// point and force-closed at the last one; equity <= 0 at a mark liquidates and stops the run.
EquityCurve run_backtest(std::span<const DecisionPoint> points, const BacktestConfig& cfg, double tick_size = 0.0);

/// Largest (peak - trough) / peak over the series.
double max_drawdown(std::span<const double> equity);

/// Last equity of each day over the last equity of the previous day, minus 1. The first
/// day is measured against `initial_equity`.
std::vector<double> daily_returns(const EquityCurve& curve);

/// mean / sample std * sqrt(252). Throws std::domain_error with fewer than two returns or
/// zero variance.
double annualized_sharpe(std::span<const double> daily);

struct PerformanceMetrics {
    double total_return = 0.0;
    double max_drawdown = 0.0;
    double sharpe = 0.0;  // NaN when undefined
    bool sharpe_defined = false;
    std::size_t trading_days = 0;
    std::size_t trades = 0;
};

/// Throws std::invalid_argument when the curve has fewer than two points (initial equity
/// counts as one).
PerformanceMetrics performance_metrics(const EquityCurve& curve);

void write_trades_csv(std::ostream& out, const EquityCurve& curve);
void write_equity_csv(std::ostream& out, const EquityCurve& curve);

}  // namespace snapdir::backtest
