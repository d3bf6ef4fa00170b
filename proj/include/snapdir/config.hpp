#pragma once

#include "snapdir/calendar.hpp"
#include "snapdir/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace snapdir {

struct FeedConfig {
    TickScale scale;
    int session_gap_minutes = 30;
    std::vector<ScheduleWindow> schedule;
    int utc_offset_minutes = 480;  // exchange-local time, UTC+8
    double max_malformed_fraction = 0.01;
};

struct SynthParams {
    std::uint64_t seed = 42;
    std::int64_t n_snapshots = 200'000;
    std::int64_t session_snapshots = 9000;  // 75 min of 500 ms frames
    std::string instrument = "ag_synth";
    std::int32_t start_date = 20210104;
    int session_start_minute = 9 * 60;  // exchange-local
    std::int64_t start_price_ticks = 5000;
    std::int64_t min_price_ticks = 3000;
    std::int64_t max_price_ticks = 8000;
    double move_prob = 0.15;     // chance the last price moves one tick in a frame
    double drift = 0.0;          // in [-1, 1], biases up vs down moves
    double signal = 0.3;         // in [0, 1], strength of the latent order-flow regime
    double signal_half_life = 900.0;  // frames
    double mean_volume = 6.0;    // mean contracts per frame
    double open_share = 0.5;     // expected fraction of volume that opens positions
    std::int64_t initial_oi = 100'000;
    double absent_level_prob = 0.0;
};

struct LabelConfig {
    std::int64_t window = 120;
    std::int64_t horizon = 1800;
    double theta = 0.001;
};

/// Technical-indicator windows over 1-minute bars.
struct TaParams {
    int force_window = 13;
    int eom_window = 14;
    int vpt_window = 14;
    int cmf_window = 20;
    int bb_window = 20;
    double bb_dev = 2.0;
    int kc_window = 10;
    int dc_window = 20;
    int macd_fast = 12;
    int macd_slow = 26;
    int macd_sign = 9;
    int sma_fast = 16;
    int sma_slow = 32;
    int rsi_window = 14;
    int stoch_window = 14;
    int smooth_k = 3;
    int smooth_d = 3;
};

struct FeatureConfig {
    std::vector<int> window_minutes{5, 10, 15, 30};
    std::int64_t snapshots_per_minute = 120;
    std::int64_t bar_snapshots = 120;
    std::int64_t filter_threshold = 10;
    TaParams ta;
};

struct SplitConfig {
    int n_folds = 5;
    int gap_groups = 1;
    double holdout_fraction = 0.2;
};

struct TrainConfig {
    std::string model_kind = "baseline";  // baseline | external
    std::string external_predictions;
    double learning_rate = 0.5;
    int epochs = 200;
    double l2 = 1e-4;
    // Pass-through hyperparameters for an external attentive tabular trainer.
    int tabnet_n_d = 32;
    int tabnet_n_a = 32;
    int tabnet_n_steps = 5;
};

struct BacktestConfig {
    double gamma = 0.25;
    double margin_ratio = 0.10;
    double initial_equity = 1'000'000.0;
    double fee_rate = 0.0;
    double slippage_ticks = 0.0;
    int decision_interval_minutes = 15;
};

struct PipelineConfig {
    std::string data_path;
    std::string work_dir = "snapdir_work";
    bool drop_flagged = true;
    int jobs = 1;
    std::uint64_t seed = 42;
    FeedConfig feed;
    SynthParams synth;
    LabelConfig label;
    FeatureConfig features;
    SplitConfig split;
    TrainConfig train;
    BacktestConfig backtest;

    static PipelineConfig parse(std::string_view text);
    static PipelineConfig load(const std::filesystem::path& path);

    /// Canonical flat key=value form; parse(serialize()) reproduces every field.
    std::string serialize() const;

    /// Throws ConfigError if a value falls outside its owning module's domain.
    void validate() const;
};

}  // namespace snapdir
