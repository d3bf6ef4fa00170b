#pragma once

#include "snapdir/config.hpp"
#include "snapdir/dataset.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace snapdir::model {

enum class ModelKind { BaselineLogistic, External };

std::string_view to_string(ModelKind k) noexcept;
ModelKind parse_model_kind(std::string_view text);  // "baseline" | "external"; throws ConfigError

/// Per-column centering and scaling fit on training rows only. Constant columns get scale 1.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const dataset::FeatureMatrix& m, std::span<const std::size_t> rows);
    static Standardizer fit(const dataset::FeatureMatrix& m);
    void apply(std::span<const double> in, std::span<double> out) const noexcept;
};

struct ClassifierHandle {
    ModelKind kind = ModelKind::BaselineLogistic;
    int fold = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> columns;
    Standardizer standardizer;
    std::vector<double> weights;  // on standardized features
    double bias = 0.0;
    std::string external_predictions;  // External kind only
    TrainConfig hyperparameters;
    std::vector<double> loss_history;  // training loss before each epoch and after the last
};

struct LossGradient {
    double loss = 0.0;
    std::vector<double> grad_w;
    double grad_b = 0.0;
};

/// Mean logistic loss plus 0.5 * l2 * |w|^2 over row-major standardized rows, with its gradient.
LossGradient logistic_loss(std::span<const double> x, std::span<const std::int8_t> y, std::size_t n_features,
                           std::span<const double> w, double b, double l2);

/// Full-batch gradient descent on standardized features starting from zero weights. A step
/// that would raise the loss is retried with half the learning rate, so the loss history is
/// non-increasing. Throws DataIntegrityError on single-class data or a non-finite loss.
ClassifierHandle fit_baseline(const dataset::FeatureMatrix& train, const TrainConfig& cfg, std::uint64_t seed = 0,
                              int fold = 0);

/// Baseline probabilities for every row. Columns are matched by name; throws
/// DataIntegrityError naming the first manifest column absent from `rows`.
std::vector<double> predict(const ClassifierHandle& handle, const dataset::FeatureMatrix& rows);

/// Fold probabilities produced outside this library, keyed by (session_id, timestamp_ms, fold).
class ExternalPredictions {
public:
    /// NDJSON lines {"session_id":..., "timestamp_ms":..., "fold":..., "prob":...}.
    static ExternalPredictions read(std::istream& in);
    static ExternalPredictions load(const std::string& path);

    void insert(const std::string& session_id, std::int64_t timestamp_ms, int fold, double prob);
    std::size_t size() const noexcept { return probs_.size(); }

    /// Probabilities for every row of `rows` under `fold`; throws DataIntegrityError naming
    /// the first row key without an entry.
    std::vector<double> lookup(const dataset::FeatureMatrix& rows, int fold) const;

private:
    std::map<std::tuple<std::string, std::int64_t, int>, double> probs_;
};

/// Handle dispatch: baseline evaluates the model, External reads its predictions file.
std::vector<double> predict_any(const ClassifierHandle& handle, const dataset::FeatureMatrix& rows);

void write_predictions_ndjson(std::ostream& out, const dataset::FeatureMatrix& rows, int fold,
                              std::span<const double> probs);

/// JSON manifest carrying everything needed for a bit-identical reload.
void save_manifest(std::ostream& out, const ClassifierHandle& handle);
ClassifierHandle load_manifest(std::istream& in);

}  // namespace snapdir::model
