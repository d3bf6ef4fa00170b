#pragma once

#include "snapdir/backtest.hpp"
#include "snapdir/dataset.hpp"
#include "snapdir/labeling.hpp"
#include "snapdir/metrics.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace snapdir::report {

struct FoldScore {
    int fold = 0;
    std::size_t train_groups = 0;
    std::size_t validation_groups = 0;
    std::size_t train_rows = 0;
    std::size_t validation_rows = 0;
    double auc = 0;  // NaN when the validation block has one class
    double accuracy = 0;
};

struct RunSummary {
    std::size_t sessions = 0;
    std::size_t snapshots = 0;
    std::size_t rows_read = 0;
    std::size_t rows_rejected = 0;

    labeling::LabelDistribution labels;

    dataset::RetentionReport retention;
    std::size_t features = 0;
    dataset::DistributionSummary correlation;
    std::size_t correlation_undefined = 0;
    std::vector<std::pair<std::string, double>> strongest;  // by |r|, descending

    std::vector<FoldScore> folds;

    std::size_t holdout_groups = 0;
    std::size_t holdout_rows = 0;
    double holdout_auc = 0;
    metrics::ClassificationReport holdout;

    std::size_t decision_points = 0;
    backtest::PerformanceMetrics performance;
    bool liquidated = false;
};

/// Plain-text run report with fixed-precision numbers, so identical runs render identically.
std::string render_text(const RunSummary& s);

/// Equity (top panel) and mark price (bottom panel) against decision index.
void render_equity_svg(std::ostream& out, const backtest::EquityCurve& curve, const std::string& title);

}  // namespace snapdir::report
