#pragma once

#include "snapdir/config.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace snapdir::pipeline {

enum class Stage { Synth, Ingest, Preprocess, Features, Label, Dataset, Split, Train, Predict, Ensemble, Backtest, Report };

std::string_view to_string(Stage s) noexcept;
Stage parse_stage(std::string_view name);  // throws ConfigError

/// Every stage in execution order; Synth only when the config names no input file.
std::vector<Stage> stage_order(const PipelineConfig& cfg);

/// Stages whose artifacts `s` reads directly.
std::vector<Stage> upstream(Stage s, const PipelineConfig& cfg);

/// Runs fn(0..n-1) on up to `jobs` threads. The first exception (by index) is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

struct Artifact {
    std::string path;  // relative to the work directory
    std::string digest;
};

struct StageManifest {
    std::string stage;
    std::string config_digest;
    std::vector<Artifact> inputs;
    std::vector<Artifact> outputs;
};

struct StageResult {
    Stage stage;
    bool skipped = false;  // outputs were already up to date
    std::vector<Artifact> outputs;
};

/// Runs stages against a work directory. Each stage writes its artifacts plus
/// `<stage>/manifest.json` recording the digests of its inputs, outputs and the
/// configuration keys it depends on.
class Runner {
public:
    Runner(PipelineConfig cfg, std::ostream& log);

    /// Runs one stage. Missing upstream artifacts raise MissingArtifactError naming the
    /// upstream stage unless `from_raw`, which reruns every upstream stage first. Upstream
    /// artifacts whose digests or configuration no longer match raise ConfigError.
    /// A stage whose recorded inputs, configuration and outputs all still match is skipped
    /// unless `force`.
    StageResult run(Stage stage, bool from_raw = false, bool force = false);

    /// Every stage in order.
    std::vector<StageResult> run_all(bool force = false);

    std::filesystem::path path(std::string_view relative) const { return work_ / relative; }
    const PipelineConfig& config() const noexcept { return cfg_; }

    /// Configuration text a stage depends on (subset of PipelineConfig::serialize()).
    std::string stage_config(Stage s) const;

    static StageManifest read_manifest(const std::filesystem::path& file);

private:
    StageResult execute(Stage s);
    void verify_upstream(Stage s) const;
    bool up_to_date(Stage s) const;
    std::vector<Artifact> current_inputs(Stage s) const;

    PipelineConfig cfg_;
    std::filesystem::path work_;
    std::ostream& log_;
    std::set<Stage> done_;
};

}  // namespace snapdir::pipeline
