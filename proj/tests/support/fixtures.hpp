#pragma once

#include "snapdir/calendar.hpp"
#include "snapdir/config.hpp"
#include "snapdir/types.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

/// A snapshot with a symmetric 5-level book around `price`, one tick wide.
inline snapdir::Snapshot snap(std::int64_t ts, std::int64_t price, std::int64_t volume, std::int64_t oi,
                              std::int64_t bid_size = 10, std::int64_t ask_size = 10) {
    snapdir::Snapshot s;
    s.timestamp_ms = ts;
    s.instrument = "ag";
    s.price_ticks = price;
    s.volume = volume;
    s.open_interest = oi;
    for (int n = 0; n < snapdir::kBookDepth; ++n) {
        s.bids[n] = {price - 1 - n, bid_size, true};
        s.asks[n] = {price + 1 + n, ask_size, true};
    }
    return s;
}

/// 09:00 exchange-local on 2021-01-04 at the default UTC+8 offset.
inline std::int64_t t0() { return snapdir::local_to_epoch_ms(20210104, 9 * 60, 480); }

/// Random-walk session of n frames every 500 ms with random books.
inline std::vector<snapdir::Snapshot> random_walk(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> step(-1, 1), lots(0, 15), size(1, 40), widen(0, 4);
    std::vector<snapdir::Snapshot> out;
    std::int64_t price = 5000, volume = 0, oi = 1000;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            price += step(rng);
            const int v = lots(rng);
            volume += v;
            std::uniform_int_distribution<int> doi(-v, v);
            oi += doi(rng);
        }
        snapdir::Snapshot s;
        s.timestamp_ms = t0() + static_cast<std::int64_t>(i) * 500;
        s.instrument = "ag";
        s.price_ticks = price;
        s.volume = volume;
        s.open_interest = oi;
        std::int64_t bid = price - 1 - (widen(rng) == 0), ask = price + 1;
        for (int lvl = 0; lvl < snapdir::kBookDepth; ++lvl) {
            s.bids[lvl] = {bid, size(rng), true};
            s.asks[lvl] = {ask, size(rng), true};
            bid -= 1 + (widen(rng) == 0);
            ask += 1 + (widen(rng) == 0);
        }
        out.push_back(s);
    }
    return out;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("snapdir_" + tag + "_" + std::to_string(std::random_device{}()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

}  // namespace fixtures
