#include "fixtures.hpp"
#include "oracles.hpp"

#include "snapdir/errors.hpp"
#include "snapdir/metrics.hpp"
#include "snapdir/model.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

using namespace snapdir;
using namespace snapdir::model;

namespace {

dataset::FeatureMatrix toy(std::size_t rows, std::size_t cols, std::uint64_t seed, double signal) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    dataset::FeatureMatrix m;
    for (std::size_t c = 0; c < cols; ++c) m.columns.push_back("f" + std::to_string(c));
    m.session_ids = {"x.20210104.0900"};
    for (std::size_t r = 0; r < rows; ++r) {
        const int y = static_cast<int>(rng() & 1);
        m.session_of_row.push_back(0);
        m.timestamps.push_back(fixtures::t0() + static_cast<std::int64_t>(r) * 500);
        m.groups.push_back(20210104);
        m.prices.push_back(5000.0);
        for (std::size_t c = 0; c < cols; ++c) {
            const double shift = c == 0 ? signal * (y == 1 ? 1.0 : -1.0) : 0.0;
            m.values.push_back(shift + z(rng));
        }
        m.labels.push_back(static_cast<std::int8_t>(y));
    }
    return m;
}

}  // namespace

TEST(Model, KindParsing) {
    EXPECT_EQ(parse_model_kind("baseline"), ModelKind::BaselineLogistic);
    EXPECT_EQ(parse_model_kind("external"), ModelKind::External);
    EXPECT_THROW(parse_model_kind("tabnet"), ConfigError);
}

TEST(Model, StandardizerUsesTrainingRowsOnly) {
    auto m = toy(4, 1, 1, 0.0);
    m.values = {1, 3, 100, 200};
    const std::size_t train[] = {0, 1};
    const auto s = Standardizer::fit(m, train);
    EXPECT_DOUBLE_EQ(s.mean[0], 2.0);
    EXPECT_DOUBLE_EQ(s.scale[0], 1.0);  // population std of {1, 3}
    for (auto& v : m.values) v = 5.0;
    EXPECT_EQ(Standardizer::fit(m).scale[0], 1.0);
}

TEST(Model, SeparableToyAccuracy) {
    const auto m = toy(2000, 3, 2, 6.0);
    const auto h = fit_baseline(m, TrainConfig{});
    const auto p = predict(h, m);
    const auto rep = metrics::classification_report(p, m.labels);
    EXPECT_GE(rep.accuracy, 0.99);
}

TEST(Model, NoiseGivesChanceAuc) {
    const auto train = toy(10'000, 5, 3, 0.0);
    const auto test = toy(10'000, 5, 4, 0.0);
    const auto h = fit_baseline(train, TrainConfig{});
    EXPECT_NEAR(metrics::auc_roc(predict(h, test), test.labels), 0.5, 0.05);
}

TEST(Model, ZeroWeightsGiveHalf) {
    const auto m = toy(10, 2, 5, 1.0);
    ClassifierHandle h;
    h.columns = m.columns;
    h.standardizer = Standardizer::fit(m);
    h.weights = {0.0, 0.0};
    for (double p : predict(h, m)) EXPECT_EQ(p, 0.5);
}

TEST(Model, LossHistoryNonIncreasing) {
    auto cfg = TrainConfig{};
    cfg.learning_rate = 50.0;  // forces step halving
    cfg.epochs = 40;
    const auto h = fit_baseline(toy(500, 4, 6, 1.0), cfg);
    ASSERT_EQ(h.loss_history.size(), 41u);
    for (std::size_t i = 1; i < h.loss_history.size(); ++i) EXPECT_LE(h.loss_history[i], h.loss_history[i - 1]);
    EXPECT_NEAR(h.loss_history.front(), std::log(2.0), 1e-12);
}

TEST(Model, GradientMatchesFiniteDifference) {
    const double x[] = {0.5, -1.0, 2.0, 0.3, -0.7, 1.1};
    const std::int8_t y[] = {1, 0, 1};
    const double w[] = {0.2, -0.4};
    const auto g = logistic_loss(x, y, 2, w, 0.1, 0.01);
    const double h = 1e-6;
    for (std::size_t j = 0; j < 2; ++j) {
        double wp[] = {w[0], w[1]}, wm[] = {w[0], w[1]};
        wp[j] += h;
        wm[j] -= h;
        const double fd = (logistic_loss(x, y, 2, wp, 0.1, 0.01).loss - logistic_loss(x, y, 2, wm, 0.1, 0.01).loss) / (2 * h);
        EXPECT_NEAR(g.grad_w[j], fd, 1e-8);
    }
    const double fd_b = (logistic_loss(x, y, 2, w, 0.1 + h, 0.01).loss - logistic_loss(x, y, 2, w, 0.1 - h, 0.01).loss) / (2 * h);
    EXPECT_NEAR(g.grad_b, fd_b, 1e-8);
}

TEST(Model, SingleClassIsFatal) {
    auto m = toy(50, 2, 7, 1.0);
    for (auto& l : m.labels) l = 1;
    EXPECT_THROW(fit_baseline(m, TrainConfig{}), DataIntegrityError);
}

TEST(Model, MissingColumnNamed) {
    const auto m = toy(50, 3, 8, 1.0);
    const auto h = fit_baseline(m, TrainConfig{});
    auto other = m;
    other.columns[2] = "renamed";
    try {
        predict(h, other);
        FAIL() << "expected DataIntegrityError";
    } catch (const DataIntegrityError& e) {
        EXPECT_NE(std::string(e.what()).find("f2"), std::string::npos);
    }
}

TEST(Model, ColumnsMatchedByName) {
    const auto m = toy(200, 3, 9, 2.0);
    const auto h = fit_baseline(m, TrainConfig{});
    auto shuffled = m;
    shuffled.columns = {"f2", "f0", "f1"};
    for (std::size_t r = 0; r < m.rows(); ++r) {
        shuffled.values[r * 3 + 0] = m.at(r, 2);
        shuffled.values[r * 3 + 1] = m.at(r, 0);
        shuffled.values[r * 3 + 2] = m.at(r, 1);
    }
    EXPECT_EQ(predict(h, shuffled), predict(h, m));
}

TEST(Model, ManifestRoundTripBitIdentical) {
    const auto m = toy(300, 4, 10, 1.0);
    const auto h = fit_baseline(m, TrainConfig{}, 77, 3);
    std::stringstream io;
    save_manifest(io, h);
    const auto back = load_manifest(io);
    EXPECT_EQ(back.fold, 3);
    EXPECT_EQ(back.seed, 77u);
    EXPECT_EQ(back.columns, h.columns);
    ASSERT_EQ(back.weights.size(), h.weights.size());
    EXPECT_EQ(std::memcmp(back.weights.data(), h.weights.data(), h.weights.size() * sizeof(double)), 0);
    EXPECT_EQ(back.bias, h.bias);
    EXPECT_EQ(back.standardizer.mean, h.standardizer.mean);
    EXPECT_EQ(back.standardizer.scale, h.standardizer.scale);
    EXPECT_EQ(predict(back, m), predict(h, m));
}

TEST(External, LookupAndMissingKey) {
    const auto m = toy(3, 1, 11, 0.0);
    std::stringstream io;
    const double probs[] = {0.1, 0.7, 0.4};
    write_predictions_ndjson(io, m, 2, probs);
    const auto ext = ExternalPredictions::read(io);
    EXPECT_EQ(ext.size(), 3u);
    EXPECT_EQ(ext.lookup(m, 2), (std::vector<double>{0.1, 0.7, 0.4}));
    try {
        ext.lookup(m, 1);
        FAIL() << "expected DataIntegrityError";
    } catch (const DataIntegrityError& e) {
        EXPECT_NE(std::string(e.what()).find("x.20210104.0900"), std::string::npos);
    }
}

TEST(External, HandleDispatchReadsFile) {
    fixtures::TempDir dir("ext");
    const auto m = toy(4, 1, 12, 0.0);
    const double probs[] = {0.2, 0.3, 0.9, 0.6};
    {
        std::ofstream out(dir.path / "p.ndjson");
        write_predictions_ndjson(out, m, 1, probs);
    }
    ClassifierHandle h;
    h.kind = ModelKind::External;
    h.fold = 1;
    h.external_predictions = (dir.path / "p.ndjson").string();
    EXPECT_EQ(predict_any(h, m), (std::vector<double>{0.2, 0.3, 0.9, 0.6}));
}
