#pragma once

#include "snapdir/config.hpp"
#include "snapdir/dataset.hpp"
#include "snapdir/types.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace snapdir::synth {

/// Deterministic RNG helpers built only on mt19937_64's raw output, so streams are
/// identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t bits() { return engine_(); }
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double normal();
    std::int64_t poisson(double mean);
    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

struct PlantedFlow {
    std::int64_t open = 0;
    std::int64_t close = 0;
};

struct SyntheticFeed {
    std::vector<Session> sessions;
    std::vector<std::vector<PlantedFlow>> planted;  // per session, per snapshot
    std::vector<std::string> warnings;               // parameters clamped into range
};

/// Bounded tick-grid random walk with Poisson trade arrivals, consistent open-interest
/// flow and a 5-level book around the last price. Each session starts with a
/// zero-volume frame so the first-row delta convention recovers planted flows exactly.
SyntheticFeed generate_synthetic_feed(const SynthParams& params, const FeedConfig& feed);

/// Rows with standard-normal features and labels drawn from a logistic model with a
/// known coefficient vector (or independent fair coins when `noise_labels`).
struct PlantedMatrixSpec {
    std::size_t n_rows = 50'000;
    std::size_t n_features = 10;
    std::size_t n_days = 60;
    double coef_norm = 4.0;
    bool noise_labels = false;
    std::uint64_t seed = 7;
};

struct PlantedMatrix {
    dataset::FeatureMatrix matrix;
    std::vector<double> coefficients;
};

PlantedMatrix make_planted_matrix(const PlantedMatrixSpec& spec);

}  // namespace snapdir::synth
