#include "snapdir/config.hpp"

#include "snapdir/errors.hpp"
#include "snapdir/text.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace snapdir {
namespace {

struct Binding {
    std::string key;
    std::function<void(PipelineConfig&, std::string_view)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
    throw ConfigError("bad value for " + std::string(key) + ": '" + std::string(value) + "'");
}

template <typename T, typename Member>
Binding number(std::string key, Member member) {
    return Binding{
        key,
        [key, member](PipelineConfig& c, std::string_view v) {
            if constexpr (std::is_floating_point_v<T>) {
                auto d = text::parse_double(v);
                if (!d || std::isnan(*d)) bad_value(key, v);
                member(c) = *d;
            } else {
                auto i = text::parse_int<T>(v);
                if (!i) bad_value(key, v);
                member(c) = *i;
            }
        },
        [member](const PipelineConfig& c) {
            const T value = member(const_cast<PipelineConfig&>(c));
            if constexpr (std::is_floating_point_v<T>) {
                return text::format_double(value);
            } else {
                return std::to_string(value);
            }
        }};
}

template <typename Member>
Binding string_key(std::string key, Member member) {
    return Binding{key, [member](PipelineConfig& c, std::string_view v) { member(c) = std::string(v); },
                   [member](const PipelineConfig& c) { return member(const_cast<PipelineConfig&>(c)); }};
}

#define FIELD(expr) [](PipelineConfig & c) -> auto& { return c.expr; }

const std::vector<Binding>& bindings() {
    static const std::vector<Binding> table = [] {
        std::vector<Binding> b;
        b.push_back(string_key("data_path", FIELD(data_path)));
        b.push_back(string_key("work_dir", FIELD(work_dir)));
        b.push_back(Binding{"drop_flagged",
                            [](PipelineConfig& c, std::string_view v) {
                                if (v != "true" && v != "false") bad_value("drop_flagged", v);
                                c.drop_flagged = v == "true";
                            },
                            [](const PipelineConfig& c) { return std::string(c.drop_flagged ? "true" : "false"); }});
        b.push_back(number<int>("jobs", FIELD(jobs)));
        b.push_back(number<std::uint64_t>("seed", FIELD(seed)));

        b.push_back(Binding{"tick_size",
                            [](PipelineConfig& c, std::string_view v) { c.feed.scale = TickScale::parse(v); },
                            [](const PipelineConfig& c) { return c.feed.scale.to_string(); }});
        b.push_back(number<int>("session_gap_minutes", FIELD(feed.session_gap_minutes)));
        b.push_back(number<int>("utc_offset_minutes", FIELD(feed.utc_offset_minutes)));
        b.push_back(number<double>("max_malformed_fraction", FIELD(feed.max_malformed_fraction)));

        b.push_back(number<std::int64_t>("synth_snapshots", FIELD(synth.n_snapshots)));
        b.push_back(number<std::int64_t>("synth_session_snapshots", FIELD(synth.session_snapshots)));
        b.push_back(string_key("synth_instrument", FIELD(synth.instrument)));
        b.push_back(number<std::int32_t>("synth_start_date", FIELD(synth.start_date)));
        b.push_back(number<int>("synth_session_start_minute", FIELD(synth.session_start_minute)));
        b.push_back(number<std::int64_t>("synth_start_price_ticks", FIELD(synth.start_price_ticks)));
        b.push_back(number<std::int64_t>("synth_min_price_ticks", FIELD(synth.min_price_ticks)));
        b.push_back(number<std::int64_t>("synth_max_price_ticks", FIELD(synth.max_price_ticks)));
        b.push_back(number<double>("synth_move_prob", FIELD(synth.move_prob)));
        b.push_back(number<double>("synth_drift", FIELD(synth.drift)));
        b.push_back(number<double>("synth_signal", FIELD(synth.signal)));
        b.push_back(number<double>("synth_signal_half_life", FIELD(synth.signal_half_life)));
        b.push_back(number<double>("synth_mean_volume", FIELD(synth.mean_volume)));
        b.push_back(number<double>("synth_open_share", FIELD(synth.open_share)));
        b.push_back(number<std::int64_t>("synth_initial_oi", FIELD(synth.initial_oi)));
        b.push_back(number<double>("synth_absent_level_prob", FIELD(synth.absent_level_prob)));

        b.push_back(number<std::int64_t>("vwap_window", FIELD(label.window)));
        b.push_back(number<std::int64_t>("horizon", FIELD(label.horizon)));
        b.push_back(number<double>("theta", FIELD(label.theta)));

        b.push_back(Binding{"windows",
                            [](PipelineConfig& c, std::string_view v) {
                                c.features.window_minutes.clear();
                                for (auto part : text::split(v, ',')) {
                                    auto m = text::parse_int<int>(text::trim(part));
                                    if (!m) bad_value("windows", v);
                                    c.features.window_minutes.push_back(*m);
                                }
                            },
                            [](const PipelineConfig& c) {
                                std::string out;
                                for (std::size_t i = 0; i < c.features.window_minutes.size(); ++i) {
                                    if (i) out += ',';
                                    out += std::to_string(c.features.window_minutes[i]);
                                }
                                return out;
                            }});
        b.push_back(number<std::int64_t>("snapshots_per_minute", FIELD(features.snapshots_per_minute)));
        b.push_back(number<std::int64_t>("bar_snapshots", FIELD(features.bar_snapshots)));
        b.push_back(number<std::int64_t>("filter_threshold", FIELD(features.filter_threshold)));

        b.push_back(number<int>("ta_force_window", FIELD(features.ta.force_window)));
        b.push_back(number<int>("ta_eom_window", FIELD(features.ta.eom_window)));
        b.push_back(number<int>("ta_vpt_window", FIELD(features.ta.vpt_window)));
        b.push_back(number<int>("ta_cmf_window", FIELD(features.ta.cmf_window)));
        b.push_back(number<int>("ta_bb_window", FIELD(features.ta.bb_window)));
        b.push_back(number<double>("ta_bb_dev", FIELD(features.ta.bb_dev)));
        b.push_back(number<int>("ta_kc_window", FIELD(features.ta.kc_window)));
        b.push_back(number<int>("ta_dc_window", FIELD(features.ta.dc_window)));
        b.push_back(number<int>("ta_macd_fast", FIELD(features.ta.macd_fast)));
        b.push_back(number<int>("ta_macd_slow", FIELD(features.ta.macd_slow)));
        b.push_back(number<int>("ta_macd_sign", FIELD(features.ta.macd_sign)));
        b.push_back(number<int>("ta_sma_fast", FIELD(features.ta.sma_fast)));
        b.push_back(number<int>("ta_sma_slow", FIELD(features.ta.sma_slow)));
        b.push_back(number<int>("ta_rsi_window", FIELD(features.ta.rsi_window)));
        b.push_back(number<int>("ta_stoch_window", FIELD(features.ta.stoch_window)));
        b.push_back(number<int>("ta_smooth_k", FIELD(features.ta.smooth_k)));
        b.push_back(number<int>("ta_smooth_d", FIELD(features.ta.smooth_d)));

        b.push_back(number<int>("n_folds", FIELD(split.n_folds)));
        b.push_back(number<int>("gap_groups", FIELD(split.gap_groups)));
        b.push_back(number<double>("holdout_fraction", FIELD(split.holdout_fraction)));

        b.push_back(string_key("model_kind", FIELD(train.model_kind)));
        b.push_back(string_key("external_predictions", FIELD(train.external_predictions)));
        b.push_back(number<double>("learning_rate", FIELD(train.learning_rate)));
        b.push_back(number<int>("epochs", FIELD(train.epochs)));
        b.push_back(number<double>("l2", FIELD(train.l2)));
        b.push_back(number<int>("tabnet_n_d", FIELD(train.tabnet_n_d)));
        b.push_back(number<int>("tabnet_n_a", FIELD(train.tabnet_n_a)));
        b.push_back(number<int>("tabnet_n_steps", FIELD(train.tabnet_n_steps)));

        b.push_back(number<double>("gamma", FIELD(backtest.gamma)));
        b.push_back(number<double>("margin_ratio", FIELD(backtest.margin_ratio)));
        b.push_back(number<double>("initial_equity", FIELD(backtest.initial_equity)));
        b.push_back(number<double>("fee_rate", FIELD(backtest.fee_rate)));
        b.push_back(number<double>("slippage_ticks", FIELD(backtest.slippage_ticks)));
        b.push_back(number<int>("decision_interval_minutes", FIELD(backtest.decision_interval_minutes)));
        return b;
    }();
    return table;
}

#undef FIELD

}  // namespace

PipelineConfig PipelineConfig::parse(std::string_view input) {
    PipelineConfig cfg;
    bool schedule_seen = false;
    std::istringstream in{std::string(input)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = text::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        const auto key = text::trim(line.substr(0, eq));
        const auto value = text::trim(line.substr(eq + 1));
        if (key == "session_schedule") {
            if (!schedule_seen) cfg.feed.schedule.clear();
            schedule_seen = true;
            cfg.feed.schedule.push_back(ScheduleWindow::parse(value));
            continue;
        }
        bool found = false;
        for (const auto& b : bindings()) {
            if (b.key == key) {
                b.set(cfg, value);
                found = true;
                break;
            }
        }
        if (!found) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
    cfg.validate();
    return cfg;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string PipelineConfig::serialize() const {
    std::string out;
    for (const auto& b : bindings()) {
        out += b.key;
        out += '=';
        out += b.get(*this);
        out += '\n';
    }
    for (const auto& w : feed.schedule) out += "session_schedule=" + w.to_string() + "\n";
    return out;
}

void PipelineConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError("config: " + what);
    };
    require(jobs >= 1, "jobs must be >= 1");
    require(feed.session_gap_minutes > 0, "session_gap_minutes must be > 0");
    require(feed.max_malformed_fraction >= 0 && feed.max_malformed_fraction <= 1, "max_malformed_fraction in [0,1]");
    require(feed.utc_offset_minutes > -24 * 60 && feed.utc_offset_minutes < 24 * 60, "utc_offset_minutes out of range");
    require(label.window >= 1 && label.horizon >= 1, "vwap_window and horizon must be positive");
    require(label.theta >= 0, "theta must be >= 0");
    require(!features.window_minutes.empty(), "windows must be non-empty");
    std::set<int> seen;
    for (int m : features.window_minutes) {
        require(m >= 1, "window minutes must be >= 1");
        require(seen.insert(m).second, "duplicate window " + std::to_string(m));
    }
    require(features.snapshots_per_minute >= 1 && features.bar_snapshots >= 1, "snapshot counts must be positive");
    require(features.filter_threshold >= 0, "filter_threshold must be >= 0");
    const auto& ta = features.ta;
    for (int w : {ta.force_window, ta.eom_window, ta.vpt_window, ta.cmf_window, ta.bb_window, ta.kc_window,
                  ta.dc_window, ta.macd_fast, ta.macd_slow, ta.macd_sign, ta.sma_fast, ta.sma_slow, ta.rsi_window,
                  ta.stoch_window, ta.smooth_k, ta.smooth_d}) {
        require(w >= 1, "indicator windows must be >= 1");
    }
    require(ta.macd_fast < ta.macd_slow, "ta_macd_fast must be < ta_macd_slow");
    require(ta.bb_dev > 0, "ta_bb_dev must be > 0");
    require(split.n_folds >= 1 && split.gap_groups >= 0, "n_folds >= 1 and gap_groups >= 0");
    require(split.holdout_fraction >= 0 && split.holdout_fraction < 1, "holdout_fraction in [0,1)");
    require(train.model_kind == "baseline" || train.model_kind == "external", "model_kind must be baseline|external");
    require(train.model_kind != "external" || !train.external_predictions.empty(),
            "external model_kind needs external_predictions");
    require(train.learning_rate > 0 && train.epochs >= 1 && train.l2 >= 0, "bad training hyperparameters");
    require(backtest.gamma >= 0 && backtest.gamma < 0.5, "gamma in [0, 0.5)");
    require(backtest.margin_ratio > 0 && backtest.margin_ratio <= 1, "margin_ratio in (0, 1]");
    require(backtest.initial_equity > 0, "initial_equity must be > 0");
    require(backtest.fee_rate >= 0 && backtest.slippage_ticks >= 0, "fees and slippage must be >= 0");
    require(backtest.decision_interval_minutes >= 1, "decision_interval_minutes must be >= 1");
}

}  // namespace snapdir
