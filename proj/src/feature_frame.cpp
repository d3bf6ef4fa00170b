#include "snapdir/feature_frame.hpp"

#include "snapdir/errors.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace snapdir {
namespace {

constexpr char kMagic[8] = {'S', 'D', 'F', 'R', 'A', 'M', 'E', '1'};

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw DataIntegrityError("truncated feature frame file");
    return v;
}

}  // namespace

std::string describe_flags(std::uint32_t flags) {
    static const std::pair<std::uint32_t, const char*> names[] = {
        {kFlagAbsentLevel, "absent_level"},         {kFlagInconsistentFrame, "inconsistent_frame"},
        {kFlagVolumeRegression, "volume_regression"}, {kFlagEmptyFilteredSet, "empty_filtered_set"},
        {kFlagZeroCloseSum, "zero_close_sum"},       {kFlagZeroOpenInterest, "zero_open_interest"},
        {kFlagDegenerateBar, "degenerate_bar"},      {kFlagFlatBand, "flat_band"},
        {kFlagFlatRsi, "flat_rsi"},                  {kFlagZeroVolumeWindow, "zero_volume_window"},
        {kFlagShortBar, "short_bar"},
    };
    std::string out;
    for (const auto& [bit, name] : names) {
        if (flags & bit) {
            if (!out.empty()) out += '|';
            out += name;
        }
    }
    return out;
}

std::size_t FeatureFrame::index_of(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw std::out_of_range("no feature column " + name);
    return static_cast<std::size_t>(it - names.begin());
}

void FeatureFrame::append_columns(const FeatureFrame& other) {
    if (other.rows != rows) throw std::invalid_argument("append_columns: row count mismatch");
    const std::size_t a = cols(), b = other.cols();
    std::vector<double> merged(rows * (a + b));
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(r * a), a, merged.begin() + static_cast<std::ptrdiff_t>(r * (a + b)));
        std::copy_n(other.values.begin() + static_cast<std::ptrdiff_t>(r * b), b,
                    merged.begin() + static_cast<std::ptrdiff_t>(r * (a + b) + a));
        flags[r] |= other.flags[r];
    }
    values = std::move(merged);
    names.insert(names.end(), other.names.begin(), other.names.end());
}

void write_frames(std::ostream& out, std::span<const FeatureFrame> frames) {
    out.write(kMagic, sizeof kMagic);
    put<std::uint64_t>(out, frames.size());
    for (const auto& f : frames) {
        put<std::uint64_t>(out, f.cols());
        for (const auto& n : f.names) {
            put<std::uint32_t>(out, static_cast<std::uint32_t>(n.size()));
            out.write(n.data(), static_cast<std::streamsize>(n.size()));
        }
        put<std::uint64_t>(out, f.rows);
        out.write(reinterpret_cast<const char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(f.flags.data()), static_cast<std::streamsize>(f.flags.size() * sizeof(std::uint32_t)));
    }
}

std::vector<FeatureFrame> read_frames(std::istream& in) {
    char magic[sizeof kMagic];
    if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kMagic)) {
        throw DataIntegrityError("not a feature frame file");
    }
    const auto n = get<std::uint64_t>(in);
    std::vector<FeatureFrame> frames;
    frames.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto cols = get<std::uint64_t>(in);
        std::vector<std::string> names(cols);
        for (auto& name : names) {
            name.resize(get<std::uint32_t>(in));
            if (!in.read(name.data(), static_cast<std::streamsize>(name.size()))) throw DataIntegrityError("truncated feature frame file");
        }
        const auto rows = get<std::uint64_t>(in);
        FeatureFrame f(std::move(names), rows);
        if (!in.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * sizeof(double))) ||
            !in.read(reinterpret_cast<char*>(f.flags.data()), static_cast<std::streamsize>(f.flags.size() * sizeof(std::uint32_t)))) {
            throw DataIntegrityError("truncated feature frame file");
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

}  // namespace snapdir
