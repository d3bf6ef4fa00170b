#include "snapdir/dataset.hpp"

#include "snapdir/errors.hpp"
#include "snapdir/text.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>

namespace snapdir::dataset {

std::vector<double> FeatureMatrix::column(std::size_t c) const {
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, c);
    return out;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows) const {
    FeatureMatrix out;
    out.columns = columns;
    out.session_ids = session_ids;
    const std::size_t w = cols();
    out.values.reserve(rows.size() * w);
    for (std::size_t r : rows) {
        out.session_of_row.push_back(session_of_row[r]);
        out.timestamps.push_back(timestamps[r]);
        out.groups.push_back(groups[r]);
        out.prices.push_back(prices[r]);
        const auto src = row(r);
        out.values.insert(out.values.end(), src.begin(), src.end());
        if (labeled()) out.labels.push_back(labels[r]);
    }
    return out;
}

std::vector<std::size_t> FeatureMatrix::rows_in_groups(std::span<const std::int32_t> sorted_groups) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < rows(); ++r) {
        if (std::binary_search(sorted_groups.begin(), sorted_groups.end(), groups[r])) out.push_back(r);
    }
    return out;
}

FeatureMatrix assemble(std::span<const SessionInputs> sessions, std::uint32_t drop_flags, RetentionReport& report) {
    report = RetentionReport{};
    FeatureMatrix m;
    if (sessions.empty()) throw DataIntegrityError("assemble: no sessions");
    const bool labeled = sessions.front().labels != nullptr;

    std::vector<const SessionInputs*> order;
    for (const auto& s : sessions) {
        if (s.session == nullptr || s.ta == nullptr || s.micro == nullptr) {
            throw std::invalid_argument("assemble: incomplete session inputs");
        }
        if ((s.labels != nullptr) != labeled) throw std::invalid_argument("assemble: labels given for only some sessions");
        order.push_back(&s);
    }
    std::stable_sort(order.begin(), order.end(), [](const SessionInputs* a, const SessionInputs* b) {
        return a->session->start_ms < b->session->start_ms;
    });

    m.columns = order.front()->ta->names;
    m.columns.insert(m.columns.end(), order.front()->micro->names.begin(), order.front()->micro->names.end());
    if (std::set<std::string>(m.columns.begin(), m.columns.end()).size() != m.columns.size()) {
        throw std::invalid_argument("assemble: column name collision");
    }
    const std::size_t n_ta = order.front()->ta->cols();
    const std::size_t width = m.columns.size();

    for (const auto* in : order) {
        const Session& session = *in->session;
        const FeatureFrame& ta = *in->ta;
        const FeatureFrame& micro = *in->micro;
        const std::size_t n = session.size();
        if (ta.names.size() != n_ta || micro.cols() != width - n_ta ||
            !std::equal(ta.names.begin(), ta.names.end(), m.columns.begin()) ||
            !std::equal(micro.names.begin(), micro.names.end(), m.columns.begin() + static_cast<std::ptrdiff_t>(n_ta))) {
            throw std::invalid_argument("assemble: column layout differs between sessions");
        }
        if (ta.rows != n || micro.rows != n) throw std::invalid_argument("assemble: frame length differs from session");

        const auto session_index = static_cast<std::uint32_t>(m.session_ids.size());
        m.session_ids.push_back(session.session_id);
        std::size_t label_pos = 0;
        for (std::size_t i = 0; i < n; ++i) {
            ++report.candidate_rows;
            const auto ta_row = ta.row(i);
            const auto micro_row = micro.row(i);
            const bool missing = std::any_of(ta_row.begin(), ta_row.end(), is_missing) ||
                                 std::any_of(micro_row.begin(), micro_row.end(), is_missing);
            if (missing) {
                ++report.dropped_missing;
                continue;
            }
            std::uint32_t flags = ta.flags[i] | micro.flags[i];
            const labeling::LabelRecord* label = nullptr;
            if (labeled) {
                const auto& records = *in->labels;
                const std::int64_t ts = session.snapshots[i].timestamp_ms;
                while (label_pos < records.size() && records[label_pos].timestamp_ms < ts) ++label_pos;
                if (label_pos < records.size() && records[label_pos].timestamp_ms == ts) label = &records[label_pos];
                if (label != nullptr && label->zero_volume) flags |= kFlagZeroVolumeWindow;
            }
            if ((flags & drop_flags) != 0) {
                ++report.dropped_flagged;
                continue;
            }
            if (labeled && (label == nullptr || label->target == labeling::Target::Dropped)) {
                ++report.dropped_label;
                continue;
            }
            m.values.insert(m.values.end(), ta_row.begin(), ta_row.end());
            m.values.insert(m.values.end(), micro_row.begin(), micro_row.end());
            m.session_of_row.push_back(session_index);
            m.timestamps.push_back(session.snapshots[i].timestamp_ms);
            m.groups.push_back(session.trading_day);
            m.prices.push_back(session.scale.to_price(session.snapshots[i].price_ticks));
            if (labeled) m.labels.push_back(static_cast<std::int8_t>(label->target));
        }
    }
    report.retained = m.rows();
    if (m.rows() == 0) throw DataIntegrityError("assemble: no rows survived filtering");

    // Overlapping sessions (several instruments) interleave by timestamp.
    if (!std::is_sorted(m.timestamps.begin(), m.timestamps.end())) {
        std::vector<std::size_t> perm(m.rows());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::stable_sort(perm.begin(), perm.end(),
                         [&](std::size_t a, std::size_t b) { return m.timestamps[a] < m.timestamps[b]; });
        m = m.select_rows(perm);
    }
    return m;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("pearson: need at least two points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: constant series, correlation undefined");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

DistributionSummary summarize(std::vector<double> values) {
    DistributionSummary s;
    s.count = values.size();
    const double nan = std::nan("");
    if (values.empty()) {
        s.mean = s.std = s.min = s.q25 = s.q50 = s.q75 = s.max = nan;
        return s;
    }
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : nan;
    auto quantile = [&](double q) {
        const double pos = q * (n - 1.0);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    s.min = values.front();
    s.max = values.back();
    s.q25 = quantile(0.25);
    s.q50 = quantile(0.50);
    s.q75 = quantile(0.75);
    return s;
}

CorrelationReport correlation_report(const FeatureMatrix& matrix) {
    if (!matrix.labeled()) throw std::invalid_argument("correlation_report: matrix has no labels");
    CorrelationReport rep;
    rep.features = matrix.columns;
    std::vector<double> y(matrix.labels.begin(), matrix.labels.end());
    std::vector<double> defined;
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
        double r = std::nan("");
        try {
            r = pearson(matrix.column(c), y);
            defined.push_back(r);
        } catch (const std::invalid_argument&) {
            ++rep.undefined;
        }
        rep.r.push_back(r);
    }
    rep.summary = summarize(std::move(defined));
    return rep;
}

std::vector<FoldSpec> purged_group_split(std::span<const std::int32_t> ordered_groups, int n_folds, int gap_groups) {
    if (n_folds < 1) throw std::invalid_argument("purged_group_split: n_folds must be >= 1");
    if (gap_groups < 0) throw std::invalid_argument("purged_group_split: gap must be >= 0");
    for (std::size_t i = 1; i < ordered_groups.size(); ++i) {
        if (ordered_groups[i] <= ordered_groups[i - 1]) {
            throw std::invalid_argument("purged_group_split: groups must be strictly increasing");
        }
    }
    const auto n_groups = ordered_groups.size();
    const auto n_blocks = static_cast<std::size_t>(n_folds) + 1;
    const auto gap = static_cast<std::size_t>(gap_groups);
    if (n_groups < n_blocks + static_cast<std::size_t>(n_folds) * gap) {
        throw std::invalid_argument("purged_group_split: too few groups for " + std::to_string(n_folds) +
                                    " folds with gap " + std::to_string(gap_groups));
    }

    std::vector<std::size_t> block_end(n_blocks);
    const std::size_t base = n_groups / n_blocks, extra = n_groups % n_blocks;
    std::size_t pos = 0;
    for (std::size_t b = 0; b < n_blocks; ++b) {
        pos += base + (b < extra ? 1 : 0);
        block_end[b] = pos;
    }

    std::vector<FoldSpec> folds;
    for (std::size_t i = 1; i < n_blocks; ++i) {
        const std::size_t train_end = block_end[i - 1];
        if (train_end <= gap) throw std::invalid_argument("purged_group_split: gap leaves a fold without training groups");
        FoldSpec f;
        f.fold_index = static_cast<int>(i);
        f.train_groups.assign(ordered_groups.begin(), ordered_groups.begin() + static_cast<std::ptrdiff_t>(train_end - gap));
        f.purged_groups.assign(ordered_groups.begin() + static_cast<std::ptrdiff_t>(train_end - gap),
                               ordered_groups.begin() + static_cast<std::ptrdiff_t>(train_end));
        f.validation_groups.assign(ordered_groups.begin() + static_cast<std::ptrdiff_t>(train_end),
                                   ordered_groups.begin() + static_cast<std::ptrdiff_t>(block_end[i]));
        folds.push_back(std::move(f));
    }
    return folds;
}

HoldoutPlan holdout_split(std::span<const std::int32_t> ordered_groups, double fraction, int gap_groups) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("holdout_split: fraction must be in [0, 1)");
    if (gap_groups < 0) throw std::invalid_argument("holdout_split: gap must be >= 0");
    const std::size_t n = ordered_groups.size();
    HoldoutPlan plan;
    std::size_t n_test = 0;
    std::size_t gap = 0;
    if (fraction > 0.0) {
        n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
        gap = static_cast<std::size_t>(gap_groups);
    }
    if (n_test + gap >= n) throw std::invalid_argument("holdout_split: too few groups for the holdout block");
    const auto cv_end = static_cast<std::ptrdiff_t>(n - n_test - gap);
    const auto test_begin = static_cast<std::ptrdiff_t>(n - n_test);
    plan.cv_groups.assign(ordered_groups.begin(), ordered_groups.begin() + cv_end);
    plan.purged_groups.assign(ordered_groups.begin() + cv_end, ordered_groups.begin() + test_begin);
    plan.test_groups.assign(ordered_groups.begin() + test_begin, ordered_groups.end());
    return plan;
}

std::vector<std::int32_t> distinct_groups(std::span<const std::int32_t> row_groups) {
    std::vector<std::int32_t> out;
    std::set<std::int32_t> seen;
    for (auto g : row_groups) {
        if (seen.insert(g).second) out.push_back(g);
    }
    return out;
}

namespace {
constexpr std::string_view kKeyColumns[] = {"session_id", "timestamp_ms", "price", "group", "label"};
}

void write_matrix_csv(std::ostream& out, const FeatureMatrix& m) {
    std::string line;
    for (const auto& c : m.columns) {
        line += c;
        line += ',';
    }
    line += "session_id,timestamp_ms,price,group,label\n";
    out << line;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        line.clear();
        for (double v : m.row(r)) {
            text::append_double(line, v);
            line += ',';
        }
        line += m.session_of(r);
        line += ',';
        text::append_int(line, m.timestamps[r]);
        line += ',';
        text::append_double(line, m.prices[r]);
        line += ',';
        text::append_int(line, m.groups[r]);
        line += ',';
        if (m.labeled()) text::append_int(line, m.labels[r]);
        line += '\n';
        out << line;
    }
}

FeatureMatrix read_matrix_csv(std::istream& in) {
    FeatureMatrix m;
    std::string line;
    if (!std::getline(in, line)) throw DataIntegrityError("matrix csv: empty input");
    auto header = text::split(text::trim(line), ',');
    constexpr std::size_t n_keys = std::size(kKeyColumns);
    if (header.size() < n_keys ||
        !std::equal(std::begin(kKeyColumns), std::end(kKeyColumns), header.end() - static_cast<std::ptrdiff_t>(n_keys))) {
        throw DataIntegrityError("matrix csv: unexpected header");
    }
    for (std::size_t c = 0; c + n_keys < header.size(); ++c) m.columns.emplace_back(header[c]);
    const std::size_t width = m.columns.size();

    std::vector<std::string_view> fields;
    bool any_label = false, any_unlabeled = false;
    std::size_t line_no = 1;
    auto fail = [&](const char* what) {
        throw DataIntegrityError("matrix csv line " + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = text::trim(line);
        if (t.empty()) continue;
        text::split(t, ',', fields);
        if (fields.size() != width + n_keys) fail("wrong field count");
        for (std::size_t c = 0; c < width; ++c) {
            const auto v = text::parse_double(fields[c]);
            if (!v) fail("bad number");
            m.values.push_back(*v);
        }
        const std::string sid(fields[width]);
        if (m.session_ids.empty() || m.session_ids.back() != sid) {
            const auto it = std::find(m.session_ids.begin(), m.session_ids.end(), sid);
            const auto index = static_cast<std::size_t>(it - m.session_ids.begin());
            if (index == m.session_ids.size()) m.session_ids.push_back(sid);
            m.session_of_row.push_back(static_cast<std::uint32_t>(index));
        } else {
            m.session_of_row.push_back(static_cast<std::uint32_t>(m.session_ids.size() - 1));
        }
        const auto ts = text::parse_int(fields[width + 1]);
        const auto price = text::parse_double(fields[width + 2]);
        const auto group = text::parse_int<std::int32_t>(fields[width + 3]);
        if (!ts || !price || !group) fail("bad key field");
        m.timestamps.push_back(*ts);
        m.prices.push_back(*price);
        m.groups.push_back(*group);
        if (fields[width + 4].empty()) {
            any_unlabeled = true;
        } else {
            const auto label = text::parse_int<int>(fields[width + 4]);
            if (!label || (*label != 0 && *label != 1)) fail("label must be 0 or 1");
            m.labels.push_back(static_cast<std::int8_t>(*label));
            any_label = true;
        }
    }
    if (any_label && any_unlabeled) throw DataIntegrityError("matrix csv: mixed labeled and unlabeled rows");
    return m;
}

}  // namespace snapdir::dataset
