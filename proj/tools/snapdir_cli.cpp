#include "snapdir/config.hpp"
#include "snapdir/errors.hpp"
#include "snapdir/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using snapdir::PipelineConfig;
namespace pl = snapdir::pipeline;

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::string work_dir;
    std::string data_path;
    bool from_raw = false;
    bool force = false;
};

PipelineConfig load_config(const GlobalOptions& opt) {
    PipelineConfig cfg = opt.config_path.empty() ? PipelineConfig{} : PipelineConfig::load(opt.config_path);
    if (opt.seed) {
        cfg.seed = *opt.seed;
        cfg.synth.seed = *opt.seed;
    }
    if (opt.jobs) cfg.jobs = *opt.jobs;
    if (!opt.work_dir.empty()) cfg.work_dir = opt.work_dir;
    if (!opt.data_path.empty()) cfg.data_path = opt.data_path;
    cfg.validate();
    return cfg;
}

int run(const GlobalOptions& opt, std::optional<pl::Stage> stage) {
    pl::Runner runner(load_config(opt), std::cerr);
    if (stage) {
        runner.run(*stage, opt.from_raw, opt.force);
    } else {
        runner.run_all(opt.force);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"snapdir: order-book snapshot direction prediction pipeline"};
    app.require_subcommand(1);

    GlobalOptions opt;
    app.add_option("--config", opt.config_path, "key=value configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", opt.seed, "override the random seed");
    app.add_option("--jobs", opt.jobs, "maximum worker threads")->check(CLI::PositiveNumber);
    app.add_option("--work-dir", opt.work_dir, "artifact directory");
    app.add_option("--data", opt.data_path, "snapshot CSV to ingest instead of a synthetic feed");
    app.add_flag("--from-raw", opt.from_raw, "rerun every upstream stage first");
    app.add_flag("--force", opt.force, "rerun even when artifacts are up to date");

    const std::pair<const char*, const char*> stages[] = {
        {"synth", "generate a seeded synthetic snapshot feed"},
        {"ingest", "parse and validate snapshots into sessions"},
        {"preprocess", "derive per-frame deltas and 1-minute bars"},
        {"features", "compute technical and microstructure features"},
        {"label", "compute VWAP direction labels"},
        {"dataset", "assemble the feature matrix"},
        {"split", "plan purged walk-forward folds and the holdout block"},
        {"train", "fit one model per fold"},
        {"predict", "score validation and holdout rows per fold"},
        {"ensemble", "combine fold predictions on the holdout block"},
        {"backtest", "simulate the threshold strategy"},
        {"report", "render the text and SVG run report"},
    };
    std::optional<pl::Stage> selected;
    for (const auto& [name, help] : stages) {
        app.add_subcommand(name, help)->callback([&selected, n = name] { selected = pl::parse_stage(n); });
    }
    auto* all = app.add_subcommand("pipeline", "run every stage in order, skipping up-to-date ones");
    auto* show = app.add_subcommand("show-config", "print the effective configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (show->parsed()) {
            std::cout << load_config(opt).serialize();
            return 0;
        }
        return run(opt, all->parsed() ? std::nullopt : selected);
    } catch (const snapdir::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const snapdir::DataIntegrityError& e) {
        std::cerr << "data integrity error: " << e.what() << "\n";
        return 3;
    } catch (const snapdir::MissingArtifactError& e) {
        std::cerr << "missing artifact (stage '" << e.stage() << "'): " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
