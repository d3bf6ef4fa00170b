#pragma once

#include "snapdir/feature_frame.hpp"
#include "snapdir/labeling.hpp"
#include "snapdir/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace snapdir::dataset {

/// Labeled (or unlabeled) rows of features in strict time order, with row keys
/// (session, timestamp) and a trading-day group per row.
struct FeatureMatrix {
    std::vector<std::string> columns;
    std::vector<std::string> session_ids;
    std::vector<std::uint32_t> session_of_row;
    std::vector<std::int64_t> timestamps;
    std::vector<std::int32_t> groups;
    std::vector<double> prices;  // last traded price at the row, for backtesting
    std::vector<double> values;  // row-major
    std::vector<std::int8_t> labels;  // empty when unlabeled

    std::size_t rows() const noexcept { return timestamps.size(); }
    std::size_t cols() const noexcept { return columns.size(); }
    bool labeled() const noexcept { return !labels.empty(); }

    std::span<const double> row(std::size_t i) const noexcept {
        return {values.data() + i * cols(), cols()};
    }
    double at(std::size_t r, std::size_t c) const noexcept { return values[r * cols() + c]; }
    std::vector<double> column(std::size_t c) const;
    const std::string& session_of(std::size_t r) const { return session_ids[session_of_row[r]]; }

    FeatureMatrix select_rows(std::span<const std::size_t> rows) const;
    /// Rows whose group is in the sorted set `groups`.
    std::vector<std::size_t> rows_in_groups(std::span<const std::int32_t> sorted_groups) const;
};

struct RetentionReport {
    std::size_t candidate_rows = 0;
    std::size_t dropped_missing = 0;   // a feature carried a missing marker
    std::size_t dropped_flagged = 0;   // a quality flag in the drop mask was set
    std::size_t dropped_label = 0;     // label Dropped or unavailable
    std::size_t retained = 0;
};

/// Everything computed for one session, keyed by snapshot index.
struct SessionInputs {
    const Session* session = nullptr;
    const FeatureFrame* ta = nullptr;
    const FeatureFrame* micro = nullptr;
    const std::vector<labeling::LabelRecord>* labels = nullptr;  // may be null for unlabeled assembly
};

/// Inner-joins feature frames and labels per snapshot; drops rows with any missing value,
/// with a flag in `drop_flags`, or (when labels are given) with a Dropped target.
/// Throws std::invalid_argument on column-name collisions, DataIntegrityError on an empty result.
FeatureMatrix assemble(std::span<const SessionInputs> sessions, std::uint32_t drop_flags, RetentionReport& report);

/// Pearson correlation; throws std::invalid_argument for length mismatch, n < 2 or a constant series.
double pearson(std::span<const double> x, std::span<const double> y);

struct DistributionSummary {
    std::size_t count = 0;
    double mean = 0, std = 0, min = 0, q25 = 0, q50 = 0, q75 = 0, max = 0;
};

/// Sample std (n-1) and linearly interpolated quartiles.
DistributionSummary summarize(std::vector<double> values);

struct CorrelationReport {
    std::vector<std::string> features;
    std::vector<double> r;  // NaN when a feature is constant over the sample
    DistributionSummary summary;  // over defined r only
    std::size_t undefined = 0;
};

CorrelationReport correlation_report(const FeatureMatrix& matrix);

struct FoldSpec {
    int fold_index = 0;  // 1-based
    std::vector<std::int32_t> train_groups;
    std::vector<std::int32_t> purged_groups;
    std::vector<std::int32_t> validation_groups;

    friend bool operator==(const FoldSpec&, const FoldSpec&) = default;
};

/// Walk-forward split over ordered groups: n_folds + 1 contiguous near-equal blocks,
/// fold i trains on blocks 1..i minus the trailing `gap_groups` groups and validates on
/// block i + 1. Throws std::invalid_argument when there are too few groups.
std::vector<FoldSpec> purged_group_split(std::span<const std::int32_t> ordered_groups, int n_folds, int gap_groups);

/// Final out-of-sample block: the last `fraction` of groups (at least one when fraction > 0)
/// become the test set, the `gap_groups` before them are purged, and the rest feed
/// cross-validation.
struct HoldoutPlan {
    std::vector<std::int32_t> cv_groups;
    std::vector<std::int32_t> purged_groups;
    std::vector<std::int32_t> test_groups;
};

HoldoutPlan holdout_split(std::span<const std::int32_t> ordered_groups, double fraction, int gap_groups);

/// Distinct groups in first-appearance order.
std::vector<std::int32_t> distinct_groups(std::span<const std::int32_t> row_groups);

void write_matrix_csv(std::ostream& out, const FeatureMatrix& m);
FeatureMatrix read_matrix_csv(std::istream& in);

}  // namespace snapdir::dataset
