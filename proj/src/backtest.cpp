#include "snapdir/backtest.hpp"

#include "snapdir/text.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace snapdir::backtest {

std::string_view to_string(Position p) noexcept {
    switch (p) {
        case Position::Long: return "long";
        case Position::Short: return "short";
        case Position::Flat: break;
    }
    return "flat";
}

std::string_view to_string(Action a) noexcept {
    switch (a) {
        case Action::OpenLong: return "open_long";
        case Action::OpenShort: return "open_short";
        case Action::CloseLong: return "close_long";
        case Action::CloseShort: return "close_short";
        case Action::Hold: break;
    }
    return "hold";
}

Action decide(Position position, double y_hat, double gamma) noexcept {
    switch (position) {
        case Position::Flat:
            if (y_hat >= 0.5 + gamma) return Action::OpenLong;
            if (y_hat <= 0.5 - gamma) return Action::OpenShort;
            return Action::Hold;
        case Position::Long: return y_hat <= 0.5 ? Action::CloseLong : Action::Hold;
        case Position::Short: return y_hat >= 0.5 ? Action::CloseShort : Action::Hold;
    }
    return Action::Hold;
}

double position_return(Position side, double entry_price, double exit_price, double margin_ratio) noexcept {
    const double dir = static_cast<double>(static_cast<int>(side));
    return dir * (exit_price - entry_price) / (entry_price * margin_ratio);
}

StepResult decision_step(const StrategyState& state, double y_hat, double price) {
    if (!(y_hat >= 0.0 && y_hat <= 1.0)) throw std::invalid_argument("decision_step: prediction outside [0, 1]");
    StepResult out{state, decide(state.position, y_hat, state.gamma)};
    auto& s = out.state;
    switch (out.action) {
        case Action::OpenLong:
        case Action::OpenShort:
            s.position = out.action == Action::OpenLong ? Position::Long : Position::Short;
            s.entry_price = price;
            s.entry_equity = s.equity;
            break;
        case Action::CloseLong:
        case Action::CloseShort:
            s.equity = s.entry_equity * (1.0 + position_return(s.position, s.entry_price, price, s.margin_ratio));
            s.position = Position::Flat;
            s.entry_price = 0.0;
            s.entry_equity = 0.0;
            break;
        case Action::Hold: break;
    }
    return out;
}

std::vector<DecisionPoint> decision_grid(const dataset::FeatureMatrix& rows, std::span<const double> probs,
                                         int interval_minutes, int utc_offset_minutes) {
    if (probs.size() != rows.rows()) throw std::invalid_argument("decision_grid: one probability per row required");
    if (interval_minutes < 1) throw std::invalid_argument("decision_grid: interval must be >= 1 minute");
    const std::int64_t step = static_cast<std::int64_t>(interval_minutes) * 60'000;
    const std::int64_t offset = static_cast<std::int64_t>(utc_offset_minutes) * 60'000;

    std::vector<std::vector<std::size_t>> by_session(rows.session_ids.size());
    for (std::size_t r = 0; r < rows.rows(); ++r) by_session[rows.session_of_row[r]].push_back(r);

    std::vector<DecisionPoint> points;
    for (const auto& idx : by_session) {
        if (idx.empty()) continue;
        const std::int64_t first = rows.timestamps[idx.front()];
        const std::int64_t last = rows.timestamps[idx.back()];
        const std::int64_t local = first + offset;
        std::int64_t mark = local - (((local % step) + step) % step) - offset;
        if (mark < first) mark += step;
        std::size_t k = 0;
        for (; mark <= last; mark += step) {
            while (k + 1 < idx.size() && rows.timestamps[idx[k + 1]] <= mark) ++k;
            const std::size_t r = idx[k];
            points.push_back(DecisionPoint{mark, rows.groups[r], probs[r], rows.prices[r]});
        }
    }
    std::stable_sort(points.begin(), points.end(),
                     [](const DecisionPoint& a, const DecisionPoint& b) { return a.timestamp_ms < b.timestamp_ms; });
    points.erase(std::unique(points.begin(), points.end(),
                             [](const DecisionPoint& a, const DecisionPoint& b) {
                                 return a.timestamp_ms == b.timestamp_ms;
                             }),
                 points.end());
    return points;
}

EquityCurve run_backtest(std::span<const DecisionPoint> points, const BacktestConfig& cfg, double tick_size) {
    if (!(cfg.gamma >= 0.0 && cfg.gamma < 0.5)) throw std::invalid_argument("run_backtest: gamma must be in [0, 0.5)");
    if (!(cfg.margin_ratio > 0.0)) throw std::invalid_argument("run_backtest: margin ratio must be positive");
    EquityCurve curve;
    curve.initial_equity = cfg.initial_equity;
    StrategyState state;
    state.equity = cfg.initial_equity;
    state.gamma = cfg.gamma;
    state.margin_ratio = cfg.margin_ratio;
    const double slip = cfg.slippage_ticks * tick_size;
    const double fee = cfg.fee_rate / cfg.margin_ratio;  // fraction of equity per fill at full notional

    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& pt = points[i];
        if (i > 0 && pt.timestamp_ms <= points[i - 1].timestamp_ms) {
            throw std::invalid_argument("run_backtest: decision timestamps must be strictly increasing");
        }
        const bool final_point = i + 1 == points.size();
        Action action = decide(state.position, pt.prob, state.gamma);
        if (final_point) {
            if (state.position == Position::Long) action = Action::CloseLong;
            else if (state.position == Position::Short) action = Action::CloseShort;
            else action = Action::Hold;
        }
        if (action != Action::Hold) {
            // Buying fills above the last price and selling below it.
            const bool buying = action == Action::OpenLong || action == Action::CloseShort;
            const double fill = pt.price + (buying ? slip : -slip);
            const Position side = action == Action::OpenLong || action == Action::CloseLong ? Position::Long
                                                                                           : Position::Short;
            // decision_step with a saturated prediction reproduces the chosen action.
            const double y = action == Action::OpenLong || action == Action::CloseShort ? 1.0 : 0.0;
            StrategyState next = decision_step(state, y, fill).state;
            if (fee > 0.0) {
                next.equity *= 1.0 - fee;
                if (next.position != Position::Flat) next.entry_equity = next.equity;
            }
            const bool opening = next.position != Position::Flat;
            if (!opening && next.equity <= 0.0) {
                next.equity = 0.0;
                curve.trades.push_back(TradeRecord{pt.timestamp_ms, "liquidate", side, fill, 0.0});
                curve.points.push_back(CurvePoint{pt.timestamp_ms, pt.day, 0.0, Position::Flat, pt.price});
                curve.liquidated = true;
                return curve;
            }
            state = next;
            curve.trades.push_back(TradeRecord{pt.timestamp_ms, opening ? "open" : "close", side, fill, state.equity});
        }

        double mark = state.equity;
        if (state.position != Position::Flat) {
            mark = state.entry_equity *
                   (1.0 + position_return(state.position, state.entry_price, pt.price, state.margin_ratio));
            if (mark <= 0.0) {
                curve.trades.push_back(TradeRecord{pt.timestamp_ms, "liquidate", state.position, pt.price, 0.0});
                curve.points.push_back(CurvePoint{pt.timestamp_ms, pt.day, 0.0, Position::Flat, pt.price});
                curve.liquidated = true;
                return curve;
            }
        }
        curve.points.push_back(CurvePoint{pt.timestamp_ms, pt.day, mark, state.position, pt.price});
    }
    return curve;
}

double max_drawdown(std::span<const double> equity) {
    double peak = -std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (double e : equity) {
        peak = std::max(peak, e);
        if (peak > 0.0) worst = std::max(worst, (peak - e) / peak);
    }
    return worst;
}

std::vector<double> daily_returns(const EquityCurve& curve) {
    std::vector<double> out;
    double prev = curve.initial_equity;
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        const bool day_end = i + 1 == curve.points.size() || curve.points[i + 1].day != curve.points[i].day;
        if (!day_end) continue;
        const double e = curve.points[i].equity;
        out.push_back(e / prev - 1.0);
        prev = e;
    }
    return out;
}

double annualized_sharpe(std::span<const double> daily) {
    if (daily.size() < 2) throw std::domain_error("Sharpe ratio undefined: fewer than two daily returns");
    const double n = static_cast<double>(daily.size());
    const double mean = std::accumulate(daily.begin(), daily.end(), 0.0) / n;
    double ss = 0.0;
    for (double r : daily) ss += (r - mean) * (r - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    if (sd == 0.0) throw std::domain_error("Sharpe ratio undefined: zero variance of daily returns");
    return mean / sd * std::sqrt(252.0);
}

PerformanceMetrics performance_metrics(const EquityCurve& curve) {
    if (curve.points.empty()) throw std::invalid_argument("performance_metrics: empty equity curve");
    PerformanceMetrics m;
    std::vector<double> equity{curve.initial_equity};
    for (const auto& p : curve.points) equity.push_back(p.equity);
    m.total_return = equity.back() / curve.initial_equity - 1.0;
    m.max_drawdown = max_drawdown(equity);
    const auto daily = daily_returns(curve);
    m.trading_days = daily.size();
    for (const auto& t : curve.trades) m.trades += t.action == "open" ? 1 : 0;
    try {
        m.sharpe = annualized_sharpe(daily);
        m.sharpe_defined = true;
    } catch (const std::domain_error&) {
        m.sharpe = std::nan("");
    }
    return m;
}

void write_trades_csv(std::ostream& out, const EquityCurve& curve) {
    std::string line = "timestamp_ms,action,side,price,equity_after\n";
    for (const auto& t : curve.trades) {
        text::append_int(line, t.timestamp_ms);
        line += ',';
        line += t.action;
        line += ',';
        line += to_string(t.side);
        line += ',';
        text::append_double(line, t.price);
        line += ',';
        text::append_double(line, t.equity_after);
        line += '\n';
    }
    out << line;
}

void write_equity_csv(std::ostream& out, const EquityCurve& curve) {
    std::string line = "timestamp_ms,equity,position,mark_price\n";
    for (const auto& p : curve.points) {
        text::append_int(line, p.timestamp_ms);
        line += ',';
        text::append_double(line, p.equity);
        line += ',';
        line += to_string(p.position);
        line += ',';
        text::append_double(line, p.mark_price);
        line += '\n';
    }
    out << line;
}

}  // namespace snapdir::backtest
