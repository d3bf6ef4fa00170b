#include "snapdir/model.hpp"

#include "snapdir/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace snapdir::model {

std::string_view to_string(ModelKind k) noexcept {
    return k == ModelKind::External ? "external" : "baseline";
}

ModelKind parse_model_kind(std::string_view text) {
    if (text == "baseline") return ModelKind::BaselineLogistic;
    if (text == "external") return ModelKind::External;
    throw ConfigError("unknown model kind: " + std::string(text));
}

Standardizer Standardizer::fit(const dataset::FeatureMatrix& m, std::span<const std::size_t> rows) {
    const std::size_t w = m.cols();
    Standardizer s;
    s.mean.assign(w, 0.0);
    s.scale.assign(w, 1.0);
    if (rows.empty()) return s;
    const double n = static_cast<double>(rows.size());
    for (std::size_t r : rows) {
        const auto row = m.row(r);
        for (std::size_t c = 0; c < w; ++c) s.mean[c] += row[c];
    }
    for (auto& v : s.mean) v /= n;
    std::vector<double> ss(w, 0.0);
    for (std::size_t r : rows) {
        const auto row = m.row(r);
        for (std::size_t c = 0; c < w; ++c) {
            const double d = row[c] - s.mean[c];
            ss[c] += d * d;
        }
    }
    for (std::size_t c = 0; c < w; ++c) {
        const double sd = std::sqrt(ss[c] / n);
        s.scale[c] = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

Standardizer Standardizer::fit(const dataset::FeatureMatrix& m) {
    std::vector<std::size_t> rows(m.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return fit(m, rows);
}

void Standardizer::apply(std::span<const double> in, std::span<double> out) const noexcept {
    for (std::size_t c = 0; c < in.size(); ++c) out[c] = (in[c] - mean[c]) / scale[c];
}

namespace {

double sigmoid(double z) noexcept {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow
double softplus(double z) noexcept {
    return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace

LossGradient logistic_loss(std::span<const double> x, std::span<const std::int8_t> y, std::size_t n_features,
                           std::span<const double> w, double b, double l2) {
    const std::size_t n = y.size();
    LossGradient out;
    out.grad_w.assign(n_features, 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x.data() + i * n_features;
        double z = b;
        for (std::size_t c = 0; c < n_features; ++c) z += w[c] * row[c];
        // -[y log p + (1-y) log(1-p)] = softplus(z) - y z
        loss += softplus(z) - (y[i] == 1 ? z : 0.0);
        const double r = sigmoid(z) - (y[i] == 1 ? 1.0 : 0.0);
        for (std::size_t c = 0; c < n_features; ++c) out.grad_w[c] += r * row[c];
        out.grad_b += r;
    }
    const double inv = 1.0 / static_cast<double>(n);
    double norm = 0.0;
    for (std::size_t c = 0; c < n_features; ++c) {
        out.grad_w[c] = out.grad_w[c] * inv + l2 * w[c];
        norm += w[c] * w[c];
    }
    out.grad_b *= inv;
    out.loss = loss * inv + 0.5 * l2 * norm;
    return out;
}

ClassifierHandle fit_baseline(const dataset::FeatureMatrix& train, const TrainConfig& cfg, std::uint64_t seed,
                              int fold) {
    if (!train.labeled() || train.rows() == 0) throw DataIntegrityError("fit_baseline: training matrix has no labels");
    std::size_t positives = 0;
    for (auto y : train.labels) positives += y == 1 ? 1 : 0;
    if (positives == 0 || positives == train.rows()) {
        throw DataIntegrityError("fit_baseline: training data contains a single class");
    }

    ClassifierHandle h;
    h.kind = ModelKind::BaselineLogistic;
    h.fold = fold;
    h.seed = seed;
    h.columns = train.columns;
    h.hyperparameters = cfg;
    h.standardizer = Standardizer::fit(train);

    const std::size_t p = train.cols();
    std::vector<double> x(train.values.size());
    for (std::size_t r = 0; r < train.rows(); ++r) {
        h.standardizer.apply(train.row(r), std::span<double>(x.data() + r * p, p));
    }

    h.weights.assign(p, 0.0);
    h.bias = 0.0;
    auto current = logistic_loss(x, train.labels, p, h.weights, h.bias, cfg.l2);
    if (!std::isfinite(current.loss)) throw DataIntegrityError("fit_baseline: non-finite loss");
    h.loss_history.push_back(current.loss);

    double lr = cfg.learning_rate;
    std::vector<double> trial_w(p);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int attempt = 0;; ++attempt) {
            for (std::size_t c = 0; c < p; ++c) trial_w[c] = h.weights[c] - lr * current.grad_w[c];
            const double trial_b = h.bias - lr * current.grad_b;
            auto next = logistic_loss(x, train.labels, p, trial_w, trial_b, cfg.l2);
            if (!std::isfinite(next.loss) && attempt > 60) throw DataIntegrityError("fit_baseline: non-finite loss");
            if (std::isfinite(next.loss) && next.loss <= current.loss) {
                h.weights = trial_w;
                h.bias = trial_b;
                current = std::move(next);
                break;
            }
            if (attempt > 60) break;  // converged to machine precision
            lr *= 0.5;
        }
        h.loss_history.push_back(current.loss);
    }
    return h;
}

std::vector<double> predict(const ClassifierHandle& h, const dataset::FeatureMatrix& rows) {
    if (h.kind != ModelKind::BaselineLogistic) throw std::invalid_argument("predict: handle is not a baseline model");
    const std::size_t p = h.columns.size();
    std::vector<std::size_t> index(p);
    for (std::size_t c = 0; c < p; ++c) {
        const auto it = std::find(rows.columns.begin(), rows.columns.end(), h.columns[c]);
        if (it == rows.columns.end()) throw DataIntegrityError("predict: missing column " + h.columns[c]);
        index[c] = static_cast<std::size_t>(it - rows.columns.begin());
    }
    std::vector<double> out(rows.rows());
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        const auto row = rows.row(r);
        double z = h.bias;
        for (std::size_t c = 0; c < p; ++c) {
            z += h.weights[c] * (row[index[c]] - h.standardizer.mean[c]) / h.standardizer.scale[c];
        }
        out[r] = sigmoid(z);
    }
    return out;
}

ExternalPredictions ExternalPredictions::read(std::istream& in) {
    ExternalPredictions out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const double prob = j.at("prob").get<double>();
            if (!(prob >= 0.0 && prob <= 1.0)) throw DataIntegrityError("probability outside [0, 1]");
            out.insert(j.at("session_id").get<std::string>(), j.at("timestamp_ms").get<std::int64_t>(),
                       j.at("fold").get<int>(), prob);
        } catch (const nlohmann::json::exception& e) {
            throw DataIntegrityError("external predictions line " + std::to_string(line_no) + ": " + e.what());
        } catch (const DataIntegrityError& e) {
            throw DataIntegrityError("external predictions line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

ExternalPredictions ExternalPredictions::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("predict", "cannot open external predictions " + path);
    return read(in);
}

void ExternalPredictions::insert(const std::string& session_id, std::int64_t timestamp_ms, int fold, double prob) {
    probs_[{session_id, timestamp_ms, fold}] = prob;
}

std::vector<double> ExternalPredictions::lookup(const dataset::FeatureMatrix& rows, int fold) const {
    std::vector<double> out(rows.rows());
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        const auto it = probs_.find({rows.session_of(r), rows.timestamps[r], fold});
        if (it == probs_.end()) {
            throw DataIntegrityError("external predictions: no entry for session " + rows.session_of(r) +
                                     " timestamp " + std::to_string(rows.timestamps[r]) + " fold " +
                                     std::to_string(fold));
        }
        out[r] = it->second;
    }
    return out;
}

std::vector<double> predict_any(const ClassifierHandle& h, const dataset::FeatureMatrix& rows) {
    if (h.kind == ModelKind::BaselineLogistic) return predict(h, rows);
    return ExternalPredictions::load(h.external_predictions).lookup(rows, h.fold);
}

void write_predictions_ndjson(std::ostream& out, const dataset::FeatureMatrix& rows, int fold,
                              std::span<const double> probs) {
    if (probs.size() != rows.rows()) throw std::invalid_argument("write_predictions_ndjson: length mismatch");
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        nlohmann::ordered_json j;
        j["session_id"] = rows.session_of(r);
        j["timestamp_ms"] = rows.timestamps[r];
        j["fold"] = fold;
        j["prob"] = probs[r];
        out << j.dump() << '\n';
    }
}

void save_manifest(std::ostream& out, const ClassifierHandle& h) {
    nlohmann::ordered_json j;
    j["kind"] = to_string(h.kind);
    j["fold"] = h.fold;
    j["seed"] = h.seed;
    j["columns"] = h.columns;
    j["mean"] = h.standardizer.mean;
    j["scale"] = h.standardizer.scale;
    j["weights"] = h.weights;
    j["bias"] = h.bias;
    j["external_predictions"] = h.external_predictions;
    const auto& t = h.hyperparameters;
    j["hyperparameters"] = {{"learning_rate", t.learning_rate}, {"epochs", t.epochs},     {"l2", t.l2},
                            {"tabnet_n_d", t.tabnet_n_d},       {"tabnet_n_a", t.tabnet_n_a},
                            {"tabnet_n_steps", t.tabnet_n_steps}};
    j["loss_history"] = h.loss_history;
    out << j.dump(1) << '\n';
}

ClassifierHandle load_manifest(std::istream& in) {
    try {
        const auto j = nlohmann::json::parse(in);
        ClassifierHandle h;
        h.kind = parse_model_kind(j.at("kind").get<std::string>());
        h.fold = j.at("fold").get<int>();
        h.seed = j.at("seed").get<std::uint64_t>();
        h.columns = j.at("columns").get<std::vector<std::string>>();
        h.standardizer.mean = j.at("mean").get<std::vector<double>>();
        h.standardizer.scale = j.at("scale").get<std::vector<double>>();
        h.weights = j.at("weights").get<std::vector<double>>();
        h.bias = j.at("bias").get<double>();
        h.external_predictions = j.at("external_predictions").get<std::string>();
        const auto& t = j.at("hyperparameters");
        h.hyperparameters.model_kind = std::string(to_string(h.kind));
        h.hyperparameters.learning_rate = t.at("learning_rate").get<double>();
        h.hyperparameters.epochs = t.at("epochs").get<int>();
        h.hyperparameters.l2 = t.at("l2").get<double>();
        h.hyperparameters.tabnet_n_d = t.at("tabnet_n_d").get<int>();
        h.hyperparameters.tabnet_n_a = t.at("tabnet_n_a").get<int>();
        h.hyperparameters.tabnet_n_steps = t.at("tabnet_n_steps").get<int>();
        h.loss_history = j.at("loss_history").get<std::vector<double>>();
        const std::size_t p = h.columns.size();
        if (h.kind == ModelKind::BaselineLogistic &&
            (h.weights.size() != p || h.standardizer.mean.size() != p || h.standardizer.scale.size() != p)) {
            throw DataIntegrityError("model manifest: parameter vector length differs from column count");
        }
        return h;
    } catch (const nlohmann::json::exception& e) {
        throw DataIntegrityError(std::string("model manifest: ") + e.what());
    }
}

}  // namespace snapdir::model
