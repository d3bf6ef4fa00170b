#include "snapdir/pipeline.hpp"

#include "snapdir/backtest.hpp"
#include "snapdir/dataset.hpp"
#include "snapdir/digest.hpp"
#include "snapdir/errors.hpp"
#include "snapdir/feature_frame.hpp"
#include "snapdir/feed.hpp"
#include "snapdir/labeling.hpp"
#include "snapdir/metrics.hpp"
#include "snapdir/micro_features.hpp"
#include "snapdir/model.hpp"
#include "snapdir/preprocess.hpp"
#include "snapdir/report.hpp"
#include "snapdir/synthetic.hpp"
#include "snapdir/ta_features.hpp"
#include "snapdir/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace snapdir::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::pair<Stage, std::string_view> kStageNames[] = {
    {Stage::Synth, "synth"},       {Stage::Ingest, "ingest"},   {Stage::Preprocess, "preprocess"},
    {Stage::Features, "features"}, {Stage::Label, "label"},     {Stage::Dataset, "dataset"},
    {Stage::Split, "split"},       {Stage::Train, "train"},     {Stage::Predict, "predict"},
    {Stage::Ensemble, "ensemble"}, {Stage::Backtest, "backtest"}, {Stage::Report, "report"},
};

// Rows dropped from the dataset by default: frames whose flows could not be reconciled.
constexpr std::uint32_t kDefaultDropMask = kFlagInconsistentFrame | kFlagVolumeRegression;

}  // namespace

std::string_view to_string(Stage s) noexcept {
    for (const auto& [stage, name] : kStageNames) {
        if (stage == s) return name;
    }
    return "?";
}

Stage parse_stage(std::string_view name) {
    for (const auto& [stage, n] : kStageNames) {
        if (n == name) return stage;
    }
    throw ConfigError("unknown stage: " + std::string(name));
}

std::vector<Stage> stage_order(const PipelineConfig& cfg) {
    std::vector<Stage> out;
    for (const auto& [stage, name] : kStageNames) {
        if (stage == Stage::Synth && !cfg.data_path.empty()) continue;
        out.push_back(stage);
    }
    return out;
}

std::vector<Stage> upstream(Stage s, const PipelineConfig& cfg) {
    switch (s) {
        case Stage::Synth: return {};
        case Stage::Ingest:
            if (cfg.data_path.empty()) return {Stage::Synth};
            return {};
        case Stage::Preprocess: return {Stage::Ingest};
        case Stage::Features: return {Stage::Ingest, Stage::Preprocess};
        case Stage::Label: return {Stage::Ingest, Stage::Preprocess};
        case Stage::Dataset: return {Stage::Ingest, Stage::Features, Stage::Label};
        case Stage::Split: return {Stage::Dataset};
        case Stage::Train: return {Stage::Dataset, Stage::Split};
        case Stage::Predict: return {Stage::Dataset, Stage::Split, Stage::Train};
        case Stage::Ensemble: return {Stage::Dataset, Stage::Split, Stage::Predict};
        case Stage::Backtest: return {Stage::Ensemble};
        case Stage::Report:
            return {Stage::Ingest, Stage::Label, Stage::Dataset, Stage::Predict, Stage::Ensemble, Stage::Backtest};
    }
    return {};
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

namespace {

void write_file(const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + p.string());
}

std::ifstream open_input(const fs::path& p, std::string_view stage) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw MissingArtifactError(std::string(stage), "missing artifact " + p.string());
    return in;
}

json read_json(const fs::path& p, std::string_view stage) {
    auto in = open_input(p, stage);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataIntegrityError("malformed " + p.string() + ": " + e.what());
    }
}

double num(const json& j, const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? std::nan("") : v.get<double>();
}

json summary_json(const dataset::DistributionSummary& s) {
    return json{{"count", s.count}, {"mean", s.mean}, {"std", s.std}, {"min", s.min},
                {"q25", s.q25},     {"q50", s.q50},   {"q75", s.q75}, {"max", s.max}};
}

dataset::DistributionSummary summary_from(const json& j) {
    dataset::DistributionSummary s;
    s.count = j.at("count").get<std::size_t>();
    s.mean = num(j, "mean");
    s.std = num(j, "std");
    s.min = num(j, "min");
    s.q25 = num(j, "q25");
    s.q50 = num(j, "q50");
    s.q75 = num(j, "q75");
    s.max = num(j, "max");
    return s;
}

std::string join_groups(const std::vector<std::int32_t>& g) {
    std::string out;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(g[i]);
    }
    return out;
}

std::vector<std::int32_t> parse_groups(std::string_view text) {
    std::vector<std::int32_t> out;
    if (text.empty()) return out;
    for (auto part : text::split(text, ',')) {
        const auto v = text::parse_int<std::int32_t>(part);
        if (!v) throw DataIntegrityError("fold manifest: bad group id '" + std::string(part) + "'");
        out.push_back(*v);
    }
    return out;
}

struct SplitPlan {
    std::vector<dataset::FoldSpec> folds;
    dataset::HoldoutPlan holdout;
};

std::string write_split(const SplitPlan& plan) {
    std::string out;
    for (const auto& f : plan.folds) {
        out += "fold=" + std::to_string(f.fold_index) + " train=" + join_groups(f.train_groups) +
               " purged=" + join_groups(f.purged_groups) + " validation=" + join_groups(f.validation_groups) + "\n";
    }
    out += "holdout purged=" + join_groups(plan.holdout.purged_groups) + " test=" + join_groups(plan.holdout.test_groups) +
           "\n";
    return out;
}

SplitPlan read_split(std::istream& in) {
    SplitPlan plan;
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        const auto parts = text::split(text::trim(line), ' ');
        auto field = [&](std::string_view key) -> std::string_view {
            for (auto p : parts) {
                const auto eq = p.find('=');
                if (eq != std::string_view::npos && p.substr(0, eq) == key) return p.substr(eq + 1);
            }
            throw DataIntegrityError("fold manifest: missing '" + std::string(key) + "' in: " + line);
        };
        if (parts.front() == "holdout") {
            plan.holdout.purged_groups = parse_groups(field("purged"));
            plan.holdout.test_groups = parse_groups(field("test"));
        } else {
            dataset::FoldSpec f;
            const auto idx = text::parse_int<int>(field("fold"));
            if (!idx) throw DataIntegrityError("fold manifest: bad fold index in: " + line);
            f.fold_index = *idx;
            f.train_groups = parse_groups(field("train"));
            f.purged_groups = parse_groups(field("purged"));
            f.validation_groups = parse_groups(field("validation"));
            plan.folds.push_back(std::move(f));
        }
    }
    if (plan.folds.empty()) throw DataIntegrityError("fold manifest: no folds");
    return plan;
}

struct EnsembleRows {
    dataset::FeatureMatrix keys;  // no feature columns
    std::vector<double> probs;
};

EnsembleRows read_ensemble_csv(std::istream& in) {
    EnsembleRows out;
    std::string line;
    std::getline(in, line);
    std::vector<std::string_view> f;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        text::split(line, ',', f);
        if (f.size() != 7) throw DataIntegrityError("ensemble csv: bad row: " + line);
        auto& k = out.keys;
        const std::string sid(f[0]);
        if (k.session_ids.empty() || k.session_ids.back() != sid) {
            const auto it = std::find(k.session_ids.begin(), k.session_ids.end(), sid);
            const auto index = static_cast<std::size_t>(it - k.session_ids.begin());
            if (index == k.session_ids.size()) k.session_ids.push_back(sid);
            k.session_of_row.push_back(static_cast<std::uint32_t>(index));
        } else {
            k.session_of_row.push_back(static_cast<std::uint32_t>(k.session_ids.size() - 1));
        }
        const auto ts = text::parse_int(f[1]);
        const auto group = text::parse_int<std::int32_t>(f[2]);
        const auto price = text::parse_double(f[3]);
        const auto label = text::parse_int<int>(f[4]);
        const auto prob = text::parse_double(f[5]);
        if (!ts || !group || !price || !label || !prob) throw DataIntegrityError("ensemble csv: bad row: " + line);
        k.timestamps.push_back(*ts);
        k.groups.push_back(*group);
        k.prices.push_back(*price);
        k.labels.push_back(static_cast<std::int8_t>(*label));
        out.probs.push_back(*prob);
    }
    return out;
}

backtest::EquityCurve read_equity_csv(std::istream& in, double initial_equity) {
    backtest::EquityCurve curve;
    curve.initial_equity = initial_equity;
    std::string line;
    std::getline(in, line);
    std::vector<std::string_view> f;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        text::split(line, ',', f);
        const auto ts = f.size() == 4 ? text::parse_int(f[0]) : std::nullopt;
        const auto eq = f.size() == 4 ? text::parse_double(f[1]) : std::nullopt;
        const auto px = f.size() == 4 ? text::parse_double(f[3]) : std::nullopt;
        if (!ts || !eq || !px) throw DataIntegrityError("equity csv: bad row: " + line);
        backtest::CurvePoint p;
        p.timestamp_ms = *ts;
        p.equity = *eq;
        p.mark_price = *px;
        p.position = f[2] == "long" ? backtest::Position::Long
                     : f[2] == "short" ? backtest::Position::Short
                                       : backtest::Position::Flat;
        curve.points.push_back(p);
    }
    return curve;
}

std::string fold_model_path(int fold) { return "train/model_fold" + std::to_string(fold) + ".json"; }

}  // namespace

Runner::Runner(PipelineConfig cfg, std::ostream& log) : cfg_(std::move(cfg)), work_(cfg_.work_dir), log_(log) {
    cfg_.validate();
}

std::string Runner::stage_config(Stage s) const {
    static const std::vector<std::string> ingest_keys = {"data_path", "tick_size", "session_gap_minutes",
                                                         "utc_offset_minutes", "max_malformed_fraction",
                                                         "session_schedule"};
    std::vector<std::string> keys;
    std::vector<std::string> prefixes;
    switch (s) {
        case Stage::Synth:
            keys = {"seed", "tick_size", "utc_offset_minutes"};
            prefixes = {"synth_"};
            break;
        case Stage::Ingest: keys = ingest_keys; break;
        case Stage::Preprocess: keys = {"bar_snapshots"}; break;
        case Stage::Features:
            keys = {"windows", "snapshots_per_minute", "bar_snapshots", "filter_threshold"};
            prefixes = {"ta_"};
            break;
        case Stage::Label: keys = {"vwap_window", "horizon", "theta"}; break;
        case Stage::Dataset: keys = {"drop_flagged"}; break;
        case Stage::Split: keys = {"n_folds", "gap_groups", "holdout_fraction"}; break;
        case Stage::Train:
            keys = {"seed", "model_kind", "external_predictions", "learning_rate", "epochs", "l2"};
            prefixes = {"tabnet_"};
            break;
        case Stage::Predict:
        case Stage::Ensemble:
        case Stage::Report: break;
        case Stage::Backtest:
            keys = {"gamma", "margin_ratio", "initial_equity", "fee_rate", "slippage_ticks",
                    "decision_interval_minutes", "utc_offset_minutes", "tick_size"};
            break;
    }
    std::string out;
    std::istringstream in(cfg_.serialize());
    std::string line;
    while (std::getline(in, line)) {
        const auto key = line.substr(0, line.find('='));
        const bool wanted = std::find(keys.begin(), keys.end(), key) != keys.end() ||
                            std::any_of(prefixes.begin(), prefixes.end(),
                                        [&](const std::string& p) { return key.rfind(p, 0) == 0; });
        if (wanted) out += line + "\n";
    }
    return out;
}

StageManifest Runner::read_manifest(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw MissingArtifactError(file.parent_path().filename().string(), "missing manifest " + file.string());
    try {
        const auto j = json::parse(in);
        StageManifest m;
        m.stage = j.at("stage").get<std::string>();
        m.config_digest = j.at("config_digest").get<std::string>();
        for (const auto& a : j.at("inputs")) m.inputs.push_back({a.at("path"), a.at("digest")});
        for (const auto& a : j.at("outputs")) m.outputs.push_back({a.at("path"), a.at("digest")});
        return m;
    } catch (const json::exception& e) {
        throw DataIntegrityError("malformed manifest " + file.string() + ": " + e.what());
    }
}

std::vector<Artifact> Runner::current_inputs(Stage s) const {
    std::vector<Artifact> inputs;
    if (s == Stage::Ingest && !cfg_.data_path.empty()) {
        inputs.push_back({cfg_.data_path, digest::sha256_file(cfg_.data_path, "ingest")});
    }
    for (Stage u : upstream(s, cfg_)) {
        const auto m = read_manifest(work_ / to_string(u) / "manifest.json");
        inputs.insert(inputs.end(), m.outputs.begin(), m.outputs.end());
    }
    return inputs;
}

void Runner::verify_upstream(Stage s) const {
    for (Stage u : upstream(s, cfg_)) {
        const auto name = std::string(to_string(u));
        const auto manifest_path = work_ / name / "manifest.json";
        if (!fs::exists(manifest_path)) {
            throw MissingArtifactError(name, "stage '" + std::string(to_string(s)) + "' needs the artifacts of stage '" +
                                                 name + "', which is missing (run '" + name +
                                                 "' first or pass --from-raw)");
        }
        const auto m = read_manifest(manifest_path);
        if (m.config_digest != digest::sha256_hex(stage_config(u))) {
            throw ConfigError("configuration changed since stage '" + name + "' ran; rerun it or pass --from-raw");
        }
        for (const auto& a : m.outputs) {
            const auto file = work_ / a.path;
            if (!fs::exists(file)) {
                throw MissingArtifactError(name, "artifact " + a.path + " of stage '" + name + "' is missing");
            }
            if (digest::sha256_file(file, name) != a.digest) {
                throw ConfigError("digest mismatch for " + a.path + " (stage '" + name + "')");
            }
        }
    }
}

bool Runner::up_to_date(Stage s) const {
    const auto manifest_path = work_ / to_string(s) / "manifest.json";
    if (!fs::exists(manifest_path)) return false;
    StageManifest m;
    try {
        m = read_manifest(manifest_path);
    } catch (const std::exception&) {
        return false;
    }
    if (m.config_digest != digest::sha256_hex(stage_config(s))) return false;
    const auto inputs = current_inputs(s);
    if (inputs.size() != m.inputs.size()) return false;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].path != m.inputs[i].path || inputs[i].digest != m.inputs[i].digest) return false;
    }
    for (const auto& a : m.outputs) {
        const auto file = work_ / a.path;
        if (!fs::exists(file) || digest::sha256_file(file) != a.digest) return false;
    }
    return true;
}

StageResult Runner::run(Stage stage, bool from_raw, bool force) {
    if (from_raw) {
        for (Stage u : upstream(stage, cfg_)) {
            if (!done_.count(u)) run(u, true, true);
        }
    }
    verify_upstream(stage);
    const auto name = std::string(to_string(stage));
    if (!force && up_to_date(stage)) {
        log_ << name << ": up to date\n";
        done_.insert(stage);
        StageResult r{stage, true, read_manifest(work_ / name / "manifest.json").outputs};
        return r;
    }
    const auto inputs = current_inputs(stage);
    StageResult result;
    try {
        result = execute(stage);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(name + ": " + e.what());
    }

    json manifest;
    manifest["stage"] = name;
    manifest["config_digest"] = digest::sha256_hex(stage_config(stage));
    manifest["inputs"] = json::array();
    for (const auto& a : inputs) manifest["inputs"].push_back({{"path", a.path}, {"digest", a.digest}});
    manifest["outputs"] = json::array();
    for (const auto& a : result.outputs) manifest["outputs"].push_back({{"path", a.path}, {"digest", a.digest}});
    write_file(work_ / name / "manifest.json", manifest.dump(1) + "\n");
    log_ << name << ": wrote " << result.outputs.size() << " artifact(s)\n";
    done_.insert(stage);
    return result;
}

std::vector<StageResult> Runner::run_all(bool force) {
    std::vector<StageResult> out;
    for (Stage s : stage_order(cfg_)) out.push_back(run(s, false, force));
    return out;
}

namespace {

// Per-stage work against a work directory. Every loader reads artifacts from disk so each
// stage depends only on files.
class StageContext {
public:
    StageContext(const PipelineConfig& cfg, fs::path work, std::ostream& log, StageResult& result)
        : cfg_(cfg), work_(std::move(work)), log_(log), result_(result) {}

    void emit(const std::string& relative, const std::string& content) {
        write_file(work_ / relative, content);
        result_.outputs.push_back({relative, digest::sha256_hex(content)});
    }

    std::vector<Session> sessions() const {
        return feed::parse_snapshot_file(work_ / "ingest/sessions.csv", cfg_.feed).sessions;
    }

    std::vector<FeatureFrame> frames(const char* file) const {
        auto in = open_input(work_ / "features" / file, "features");
        return read_frames(in);
    }

    std::vector<labeling::LabelRecord> labels(const Session& s) const {
        auto in = open_input(work_ / "label" / "sessions" / (s.session_id + ".csv"), "label");
        return labeling::read_labels_csv(in);
    }

    dataset::FeatureMatrix matrix() const {
        auto in = open_input(work_ / "dataset/matrix.csv", "dataset");
        return dataset::read_matrix_csv(in);
    }

    SplitPlan split() const {
        auto in = open_input(work_ / "split/folds.txt", "split");
        return read_split(in);
    }

    json summary(std::string_view stage) const {
        return read_json(work_ / stage / "summary.json", stage);
    }

    const PipelineConfig& cfg() const { return cfg_; }
    std::ostream& log() { return log_; }

private:
    const PipelineConfig& cfg_;
    fs::path work_;
    std::ostream& log_;
    StageResult& result_;
};

void run_synth(StageContext& ctx) {
    auto params = ctx.cfg().synth;
    params.seed = ctx.cfg().seed;
    const auto feed = synth::generate_synthetic_feed(params, ctx.cfg().feed);
    for (const auto& w : feed.warnings) ctx.log() << "synth: warning: " << w << "\n";
    std::ostringstream out;
    feed::write_csv(out, feed.sessions);
    ctx.emit("synth/snapshots.csv", out.str());
}

void run_ingest(StageContext& ctx, const fs::path& work) {
    const auto& cfg = ctx.cfg();
    const fs::path source = cfg.data_path.empty() ? work / "synth/snapshots.csv" : fs::path(cfg.data_path);
    if (!fs::exists(source)) throw MissingArtifactError(cfg.data_path.empty() ? "synth" : "ingest", "missing input " + source.string());
    const auto parsed = feed::parse_snapshot_file(source, cfg.feed);
    std::ostringstream out;
    feed::write_csv(out, parsed.sessions);
    ctx.emit("ingest/sessions.csv", out.str());

    json j;
    std::size_t snapshots = 0;
    json list = json::array();
    for (const auto& s : parsed.sessions) {
        snapshots += s.size();
        list.push_back({{"session_id", s.session_id}, {"trading_day", s.trading_day}, {"snapshots", s.size()}});
    }
    const auto& r = parsed.report;
    j["sessions"] = parsed.sessions.size();
    j["snapshots"] = snapshots;
    j["rows_read"] = r.rows_read;
    j["rows_accepted"] = r.rows_accepted;
    j["rows_rejected"] = r.rows_rejected;
    j["rejected_by_reason"] = r.rejected_by_reason;
    j["rows_with_absent_levels"] = r.rows_with_absent_levels;
    j["session_list"] = list;
    ctx.emit("ingest/summary.json", j.dump(1) + "\n");
}

void run_preprocess(StageContext& ctx) {
    const auto sessions = ctx.sessions();
    std::ostringstream derived_out, bars_out;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        const auto derived = preprocess::derive_deltas(sessions[i]);
        const auto bars = preprocess::build_bars(sessions[i], derived,
                                                 static_cast<std::size_t>(ctx.cfg().features.bar_snapshots));
        preprocess::write_derived_csv(derived_out, sessions[i], derived, i == 0);
        preprocess::write_bars_csv(bars_out, sessions[i], bars, i == 0);
    }
    ctx.emit("preprocess/derived.csv", derived_out.str());
    ctx.emit("preprocess/bars.csv", bars_out.str());
}

void run_features(StageContext& ctx) {
    const auto sessions = ctx.sessions();
    std::vector<FeatureFrame> ta_frames(sessions.size()), micro_frames(sessions.size());
    parallel_for(sessions.size(), ctx.cfg().jobs, [&](std::size_t i) {
        const auto derived = preprocess::derive_deltas(sessions[i]);
        ta_frames[i] = ta::session_features(sessions[i], derived, ctx.cfg().features);
        micro_frames[i] = micro::session_features(derived, ctx.cfg().features, sessions[i].scale);
    });
    std::ostringstream ta_out, micro_out, registry;
    write_frames(ta_out, ta_frames);
    write_frames(micro_out, micro_frames);
    ta::dump_registry(registry, ta::indicator_registry(ctx.cfg().features.ta));
    for (const auto& name : micro::feature_names(ctx.cfg().features.window_minutes)) registry << name << "\tmicro\n";
    ctx.emit("features/ta.bin", ta_out.str());
    ctx.emit("features/micro.bin", micro_out.str());
    ctx.emit("features/registry.txt", registry.str());
}

void run_label(StageContext& ctx) {
    const auto sessions = ctx.sessions();
    std::vector<std::vector<labeling::LabelRecord>> labels(sessions.size());
    parallel_for(sessions.size(), ctx.cfg().jobs, [&](std::size_t i) {
        const auto derived = preprocess::derive_deltas(sessions[i]);
        labels[i] = labeling::label_session(sessions[i], derived, ctx.cfg().label);
    });
    std::vector<labeling::LabelRecord> all;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        std::ostringstream out;
        labeling::write_labels_csv(out, labels[i], true, true);
        ctx.emit("label/sessions/" + sessions[i].session_id + ".csv", out.str());
        all.insert(all.end(), labels[i].begin(), labels[i].end());
    }
    const auto dist = labeling::label_distribution(all);
    json j;
    j["up"] = dist.up;
    j["down"] = dist.down;
    j["pct_up"] = dist.pct_up;
    j["pct_down"] = dist.pct_down;
    j["dropped"] = all.size() - dist.up - dist.down;
    ctx.emit("label/summary.json", j.dump(1) + "\n");
}

void run_dataset(StageContext& ctx) {
    const auto sessions = ctx.sessions();
    const auto ta_frames = ctx.frames("ta.bin");
    const auto micro_frames = ctx.frames("micro.bin");
    if (ta_frames.size() != sessions.size() || micro_frames.size() != sessions.size()) {
        throw DataIntegrityError("dataset: feature frames do not match the ingested sessions");
    }
    std::vector<std::vector<labeling::LabelRecord>> labels;
    for (const auto& s : sessions) labels.push_back(ctx.labels(s));
    std::vector<dataset::SessionInputs> inputs;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        inputs.push_back({&sessions[i], &ta_frames[i], &micro_frames[i], &labels[i]});
    }
    dataset::RetentionReport retention;
    const auto m = dataset::assemble(inputs, ctx.cfg().drop_flagged ? kDefaultDropMask : 0u, retention);
    std::ostringstream out;
    dataset::write_matrix_csv(out, m);
    ctx.emit("dataset/matrix.csv", out.str());

    const auto corr = dataset::correlation_report(m);
    std::string corr_csv = "feature,r\n";
    std::vector<std::pair<std::string, double>> ranked;
    for (std::size_t c = 0; c < corr.features.size(); ++c) {
        corr_csv += corr.features[c] + "," + text::format_double(corr.r[c]) + "\n";
        if (!std::isnan(corr.r[c])) ranked.emplace_back(corr.features[c], corr.r[c]);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return std::abs(a.second) > std::abs(b.second); });
    ranked.resize(std::min<std::size_t>(ranked.size(), 5));
    ctx.emit("dataset/correlation.csv", corr_csv);

    json j;
    j["candidate_rows"] = retention.candidate_rows;
    j["dropped_missing"] = retention.dropped_missing;
    j["dropped_flagged"] = retention.dropped_flagged;
    j["dropped_label"] = retention.dropped_label;
    j["retained"] = retention.retained;
    j["features"] = m.cols();
    j["correlation"] = summary_json(corr.summary);
    j["correlation_undefined"] = corr.undefined;
    j["strongest"] = json::array();
    for (const auto& [name, r] : ranked) j["strongest"].push_back({name, r});
    ctx.emit("dataset/summary.json", j.dump(1) + "\n");
}

void run_split(StageContext& ctx) {
    const auto m = ctx.matrix();
    auto days = dataset::distinct_groups(m.groups);
    std::sort(days.begin(), days.end());
    const auto& sc = ctx.cfg().split;
    SplitPlan plan;
    plan.holdout = dataset::holdout_split(days, sc.holdout_fraction, sc.gap_groups);
    plan.folds = dataset::purged_group_split(plan.holdout.cv_groups, sc.n_folds, sc.gap_groups);
    ctx.emit("split/folds.txt", write_split(plan));
}

void run_train(StageContext& ctx) {
    const auto m = ctx.matrix();
    const auto plan = ctx.split();
    const auto& tc = ctx.cfg().train;
    const auto kind = model::parse_model_kind(tc.model_kind);
    std::vector<std::string> manifests(plan.folds.size());
    parallel_for(plan.folds.size(), ctx.cfg().jobs, [&](std::size_t i) {
        const auto& fold = plan.folds[i];
        model::ClassifierHandle h;
        if (kind == model::ModelKind::External) {
            if (tc.external_predictions.empty()) throw ConfigError("train: model_kind=external needs external_predictions");
            h.kind = kind;
            h.fold = fold.fold_index;
            h.seed = ctx.cfg().seed;
            h.columns = m.columns;
            h.external_predictions = tc.external_predictions;
            h.hyperparameters = tc;
        } else {
            const auto rows = m.rows_in_groups(fold.train_groups);
            h = model::fit_baseline(m.select_rows(rows), tc, ctx.cfg().seed, fold.fold_index);
        }
        std::ostringstream out;
        model::save_manifest(out, h);
        manifests[i] = out.str();
    });
    for (std::size_t i = 0; i < plan.folds.size(); ++i) ctx.emit(fold_model_path(plan.folds[i].fold_index), manifests[i]);
}

void run_predict(StageContext& ctx, const fs::path& work) {
    const auto m = ctx.matrix();
    const auto plan = ctx.split();
    const auto holdout = m.select_rows(m.rows_in_groups(plan.holdout.test_groups));
    const std::size_t n = plan.folds.size();
    std::vector<std::string> validation_out(n), holdout_out(n);
    std::vector<json> scores(n);
    parallel_for(n, ctx.cfg().jobs, [&](std::size_t i) {
        const auto& fold = plan.folds[i];
        auto in = open_input(work / fold_model_path(fold.fold_index), "train");
        const auto h = model::load_manifest(in);
        const auto val = m.select_rows(m.rows_in_groups(fold.validation_groups));
        const auto val_probs = model::predict_any(h, val);
        std::ostringstream vo, ho;
        model::write_predictions_ndjson(vo, val, fold.fold_index, val_probs);
        validation_out[i] = vo.str();
        if (holdout.rows() > 0) model::write_predictions_ndjson(ho, holdout, fold.fold_index, model::predict_any(h, holdout));
        holdout_out[i] = ho.str();

        json s;
        s["fold"] = fold.fold_index;
        s["train_groups"] = fold.train_groups.size();
        s["validation_groups"] = fold.validation_groups.size();
        s["train_rows"] = m.rows_in_groups(fold.train_groups).size();
        s["validation_rows"] = val.rows();
        double auc = std::nan("");
        try {
            auc = metrics::auc_roc(val_probs, val.labels);
        } catch (const std::invalid_argument&) {
        }
        s["auc"] = auc;
        s["accuracy"] = val.rows() > 0 ? metrics::classification_report(val_probs, val.labels).accuracy : std::nan("");
        scores[i] = s;
    });
    std::string v, h;
    for (std::size_t i = 0; i < n; ++i) {
        v += validation_out[i];
        h += holdout_out[i];
    }
    ctx.emit("predict/validation.ndjson", v);
    ctx.emit("predict/holdout.ndjson", h);
    json j;
    j["folds"] = scores;
    ctx.emit("predict/summary.json", j.dump(1) + "\n");
}

void run_ensemble(StageContext& ctx, const fs::path& work) {
    const auto m = ctx.matrix();
    const auto plan = ctx.split();
    const auto holdout = m.select_rows(m.rows_in_groups(plan.holdout.test_groups));
    if (holdout.rows() == 0) throw DataIntegrityError("ensemble: the holdout block has no rows");
    auto in = open_input(work / "predict/holdout.ndjson", "predict");
    const auto preds = model::ExternalPredictions::read(in);
    std::vector<std::vector<double>> fold_probs;
    for (const auto& f : plan.folds) fold_probs.push_back(preds.lookup(holdout, f.fold_index));
    const auto probs = metrics::ensemble(fold_probs);
    const auto rep = metrics::classification_report(probs, holdout.labels);
    double auc = std::nan("");
    try {
        auc = metrics::auc_roc(probs, holdout.labels);
    } catch (const std::invalid_argument&) {
    }

    std::string csv = "session_id,timestamp_ms,group,price,label,prob,predicted\n";
    for (std::size_t r = 0; r < holdout.rows(); ++r) {
        csv += holdout.session_of(r);
        csv += ',';
        text::append_int(csv, holdout.timestamps[r]);
        csv += ',';
        text::append_int(csv, holdout.groups[r]);
        csv += ',';
        text::append_double(csv, holdout.prices[r]);
        csv += ',';
        text::append_int(csv, holdout.labels[r]);
        csv += ',';
        text::append_double(csv, probs[r]);
        csv += probs[r] >= 0.5 ? ",1\n" : ",0\n";
    }
    ctx.emit("ensemble/ensemble.csv", csv);

    json j;
    j["holdout_groups"] = plan.holdout.test_groups.size();
    j["rows"] = holdout.rows();
    j["auc"] = auc;
    j["accuracy"] = rep.accuracy;
    j["recall"] = rep.recall;
    j["pearson"] = rep.pearson;
    j["tp"] = rep.confusion.tp;
    j["tn"] = rep.confusion.tn;
    j["fp"] = rep.confusion.fp;
    j["fn"] = rep.confusion.fn;
    ctx.emit("ensemble/summary.json", j.dump(1) + "\n");
}

void run_backtest(StageContext& ctx, const fs::path& work) {
    auto in = open_input(work / "ensemble/ensemble.csv", "ensemble");
    const auto rows = read_ensemble_csv(in);
    const auto& bc = ctx.cfg().backtest;
    const auto points =
        backtest::decision_grid(rows.keys, rows.probs, bc.decision_interval_minutes, ctx.cfg().feed.utc_offset_minutes);
    if (points.empty()) throw DataIntegrityError("backtest: no decision points in the evaluation range");
    const auto curve = backtest::run_backtest(points, bc, ctx.cfg().feed.scale.tick_size());
    const auto perf = backtest::performance_metrics(curve);

    std::ostringstream trades, equity, svg;
    backtest::write_trades_csv(trades, curve);
    backtest::write_equity_csv(equity, curve);
    report::render_equity_svg(svg, curve, "Strategy equity and contract price");
    ctx.emit("backtest/trades.csv", trades.str());
    ctx.emit("backtest/equity.csv", equity.str());
    ctx.emit("backtest/equity.svg", svg.str());

    json j;
    j["decision_points"] = points.size();
    j["total_return"] = perf.total_return;
    j["max_drawdown"] = perf.max_drawdown;
    j["sharpe"] = perf.sharpe;
    j["sharpe_defined"] = perf.sharpe_defined;
    j["trading_days"] = perf.trading_days;
    j["trades"] = perf.trades;
    j["liquidated"] = curve.liquidated;
    ctx.emit("backtest/summary.json", j.dump(1) + "\n");
}

void run_report(StageContext& ctx, const fs::path& work) {
    report::RunSummary s;
    const auto ingest = ctx.summary("ingest");
    s.sessions = ingest.at("sessions");
    s.snapshots = ingest.at("snapshots");
    s.rows_read = ingest.at("rows_read");
    s.rows_rejected = ingest.at("rows_rejected");

    const auto label = ctx.summary("label");
    s.labels.up = label.at("up");
    s.labels.down = label.at("down");
    s.labels.pct_up = num(label, "pct_up");
    s.labels.pct_down = num(label, "pct_down");
    s.labels.empty = s.labels.up + s.labels.down == 0;

    const auto ds = ctx.summary("dataset");
    s.retention.candidate_rows = ds.at("candidate_rows");
    s.retention.dropped_missing = ds.at("dropped_missing");
    s.retention.dropped_flagged = ds.at("dropped_flagged");
    s.retention.dropped_label = ds.at("dropped_label");
    s.retention.retained = ds.at("retained");
    s.features = ds.at("features");
    s.correlation = summary_from(ds.at("correlation"));
    s.correlation_undefined = ds.at("correlation_undefined");
    for (const auto& p : ds.at("strongest")) s.strongest.emplace_back(p.at(0).get<std::string>(), p.at(1).get<double>());

    const auto predict = ctx.summary("predict");
    for (const auto& f : predict.at("folds")) {
        report::FoldScore fs_;
        fs_.fold = f.at("fold");
        fs_.train_groups = f.at("train_groups");
        fs_.validation_groups = f.at("validation_groups");
        fs_.train_rows = f.at("train_rows");
        fs_.validation_rows = f.at("validation_rows");
        fs_.auc = num(f, "auc");
        fs_.accuracy = num(f, "accuracy");
        s.folds.push_back(fs_);
    }

    const auto ens = ctx.summary("ensemble");
    s.holdout_groups = ens.at("holdout_groups");
    s.holdout_rows = ens.at("rows");
    s.holdout_auc = num(ens, "auc");
    s.holdout.accuracy = num(ens, "accuracy");
    s.holdout.recall = num(ens, "recall");
    s.holdout.pearson = num(ens, "pearson");
    s.holdout.confusion.tp = ens.at("tp");
    s.holdout.confusion.tn = ens.at("tn");
    s.holdout.confusion.fp = ens.at("fp");
    s.holdout.confusion.fn = ens.at("fn");

    const auto bt = ctx.summary("backtest");
    s.decision_points = bt.at("decision_points");
    s.performance.total_return = num(bt, "total_return");
    s.performance.max_drawdown = num(bt, "max_drawdown");
    s.performance.sharpe = num(bt, "sharpe");
    s.performance.sharpe_defined = bt.at("sharpe_defined");
    s.performance.trading_days = bt.at("trading_days");
    s.performance.trades = bt.at("trades");
    s.liquidated = bt.at("liquidated");

    ctx.emit("report/report.txt", report::render_text(s));
    auto in = open_input(work / "backtest/equity.csv", "backtest");
    const auto curve = read_equity_csv(in, ctx.cfg().backtest.initial_equity);
    std::ostringstream svg;
    report::render_equity_svg(svg, curve, "Strategy equity and contract price (holdout)");
    ctx.emit("report/report.svg", svg.str());
}

}  // namespace

StageResult Runner::execute(Stage s) {
    StageResult result{s, false, {}};
    StageContext ctx(cfg_, work_, log_, result);
    switch (s) {
        case Stage::Synth: run_synth(ctx); break;
        case Stage::Ingest: run_ingest(ctx, work_); break;
        case Stage::Preprocess: run_preprocess(ctx); break;
        case Stage::Features: run_features(ctx); break;
        case Stage::Label: run_label(ctx); break;
        case Stage::Dataset: run_dataset(ctx); break;
        case Stage::Split: run_split(ctx); break;
        case Stage::Train: run_train(ctx); break;
        case Stage::Predict: run_predict(ctx, work_); break;
        case Stage::Ensemble: run_ensemble(ctx, work_); break;
        case Stage::Backtest: run_backtest(ctx, work_); break;
        case Stage::Report: run_report(ctx, work_); break;
    }
    return result;
}

}  // namespace snapdir::pipeline
