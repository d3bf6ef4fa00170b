#include "snapdir/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <ostream>

namespace snapdir::report {
namespace {

void appendf(std::string& out, const char* fmt, ...) __attribute__((format(printf, 2, 3)));

void appendf(std::string& out, const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    const int n = std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    if (n > 0) out.append(buf, std::min<std::size_t>(static_cast<std::size_t>(n), sizeof buf - 1));
}

std::string fixed(double v, int digits = 6) {
    if (std::isnan(v)) return "undefined";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string percent(double v) {
    if (std::isnan(v)) return "undefined";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
    return buf;
}

void heading(std::string& out, const char* title) {
    out += '\n';
    out += title;
    out += '\n';
    out.append(std::string(std::char_traits<char>::length(title), '-'));
    out += '\n';
}

void row(std::string& out, const char* label, const std::string& value) {
    appendf(out, "  %-28s %s\n", label, value.c_str());
}

void row(std::string& out, const char* label, std::size_t value) { row(out, label, std::to_string(value)); }

}  // namespace

std::string render_text(const RunSummary& s) {
    std::string out = "snapdir run report\n==================\n";

    heading(out, "Data");
    row(out, "sessions", s.sessions);
    row(out, "snapshots", s.snapshots);
    row(out, "rows read", s.rows_read);
    row(out, "rows rejected", s.rows_rejected);

    heading(out, "Label distribution");
    appendf(out, "  %-10s %12s %10s\n", "target", "count", "share");
    appendf(out, "  %-10s %12zu %10s\n", "up", s.labels.up, percent(s.labels.pct_up / 100.0).c_str());
    appendf(out, "  %-10s %12zu %10s\n", "down", s.labels.down, percent(s.labels.pct_down / 100.0).c_str());

    heading(out, "Dataset");
    row(out, "candidate rows", s.retention.candidate_rows);
    row(out, "dropped (warm-up/missing)", s.retention.dropped_missing);
    row(out, "dropped (quality flag)", s.retention.dropped_flagged);
    row(out, "dropped (label)", s.retention.dropped_label);
    row(out, "retained rows", s.retention.retained);
    row(out, "features", s.features);

    heading(out, "Feature-target correlation");
    row(out, "defined", s.correlation.count);
    row(out, "undefined (constant)", s.correlation_undefined);
    row(out, "mean", fixed(s.correlation.mean));
    row(out, "std", fixed(s.correlation.std));
    row(out, "min", fixed(s.correlation.min));
    row(out, "25%", fixed(s.correlation.q25));
    row(out, "50%", fixed(s.correlation.q50));
    row(out, "75%", fixed(s.correlation.q75));
    row(out, "max", fixed(s.correlation.max));
    if (!s.strongest.empty()) {
        out += "  strongest |r|:\n";
        for (const auto& [name, r] : s.strongest) appendf(out, "    %-34s %s\n", name.c_str(), fixed(r).c_str());
    }

    heading(out, "Cross-validation (purged walk-forward)");
    appendf(out, "  %-5s %10s %8s %11s %9s %10s %10s\n", "fold", "train_days", "val_days", "train_rows", "val_rows",
            "auc", "accuracy");
    for (const auto& f : s.folds) {
        appendf(out, "  %-5d %10zu %8zu %11zu %9zu %10s %10s\n", f.fold, f.train_groups, f.validation_groups,
                f.train_rows, f.validation_rows, fixed(f.auc).c_str(), fixed(f.accuracy).c_str());
    }

    heading(out, "Holdout classification (trimmed-mean ensemble)");
    row(out, "holdout days", s.holdout_groups);
    row(out, "holdout rows", s.holdout_rows);
    row(out, "auc", fixed(s.holdout_auc));
    row(out, "accuracy", fixed(s.holdout.accuracy));
    row(out, "recall", fixed(s.holdout.recall));
    row(out, "pearson(prob, label)", fixed(s.holdout.pearson));
    const auto& cm = s.holdout.confusion;
    out += "  confusion matrix:\n";
    appendf(out, "    %-12s %12s %12s\n", "", "pred_down", "pred_up");
    appendf(out, "    %-12s %12zu %12zu\n", "actual_down", cm.tn, cm.fp);
    appendf(out, "    %-12s %12zu %12zu\n", "actual_up", cm.fn, cm.tp);

    heading(out, "Backtest");
    row(out, "decision points", s.decision_points);
    row(out, "trades opened", s.performance.trades);
    row(out, "trading days", s.performance.trading_days);
    row(out, "total return", percent(s.performance.total_return));
    row(out, "max drawdown", percent(s.performance.max_drawdown));
    row(out, "annualized sharpe", s.performance.sharpe_defined ? fixed(s.performance.sharpe, 4) : "undefined");
    row(out, "liquidated", s.liquidated ? "yes" : "no");
    return out;
}

namespace {

void polyline(std::string& out, const std::vector<double>& ys, double x0, double y0, double w, double h,
              const char* color) {
    if (ys.empty()) return;
    double lo = *std::min_element(ys.begin(), ys.end());
    double hi = *std::max_element(ys.begin(), ys.end());
    if (hi == lo) {
        hi += 1.0;
        lo -= 1.0;
    }
    const double dx = ys.size() > 1 ? w / static_cast<double>(ys.size() - 1) : 0.0;
    out += "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"";
    out += color;
    out += "\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) {
        appendf(out, "%.2f,%.2f ", x0 + dx * static_cast<double>(i), y0 + h - (ys[i] - lo) / (hi - lo) * h);
    }
    out += "\"/>\n";
    appendf(out, "<text x=\"%.0f\" y=\"%.0f\" font-size=\"10\">%.6g</text>\n", x0 + w + 6, y0 + 10, hi);
    appendf(out, "<text x=\"%.0f\" y=\"%.0f\" font-size=\"10\">%.6g</text>\n", x0 + w + 6, y0 + h, lo);
}

}  // namespace

void render_equity_svg(std::ostream& out, const backtest::EquityCurve& curve, const std::string& title) {
    const double width = 900, height = 520, left = 50, plot_w = 760, panel_h = 190;
    std::vector<double> equity{curve.initial_equity};
    std::vector<double> price;
    for (const auto& p : curve.points) {
        equity.push_back(p.equity);
        price.push_back(p.mark_price);
    }
    std::string svg;
    appendf(svg, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" font-family=\"sans-serif\">\n",
            width, height);
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    appendf(svg, "<text x=\"%.0f\" y=\"24\" font-size=\"15\">", left);
    for (char c : title) {
        if (c == '<') svg += "&lt;";
        else if (c == '&') svg += "&amp;";
        else svg += c;
    }
    svg += "</text>\n";
    appendf(svg, "<text x=\"%.0f\" y=\"48\" font-size=\"11\">account equity</text>\n", left);
    appendf(svg, "<rect x=\"%.0f\" y=\"55\" width=\"%.0f\" height=\"%.0f\" fill=\"none\" stroke=\"#bbb\"/>\n", left, plot_w,
            panel_h);
    polyline(svg, equity, left, 55, plot_w, panel_h, "#1f77b4");
    appendf(svg, "<text x=\"%.0f\" y=\"%.0f\" font-size=\"11\">last traded price</text>\n", left, 55 + panel_h + 30);
    appendf(svg, "<rect x=\"%.0f\" y=\"%.0f\" width=\"%.0f\" height=\"%.0f\" fill=\"none\" stroke=\"#bbb\"/>\n", left,
            55 + panel_h + 37, plot_w, panel_h);
    polyline(svg, price, left, 55 + panel_h + 37, plot_w, panel_h, "#d62728");
    appendf(svg, "<text x=\"%.0f\" y=\"%.0f\" font-size=\"10\">decision points: %zu</text>\n", left, height - 12,
            curve.points.size());
    svg += "</svg>\n";
    out << svg;
}

}  // namespace snapdir::report
