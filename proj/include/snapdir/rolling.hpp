#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace snapdir::rolling {

/// Fixed-capacity ring of the most recent values.
template <typename T>
class Ring {
public:
    explicit Ring(std::size_t capacity) : buf_(capacity) {
        if (capacity == 0) throw std::invalid_argument("Ring: zero capacity");
    }

    void push(const T& v) noexcept {
        buf_[head_] = v;
        head_ = head_ + 1 == buf_.size() ? 0 : head_ + 1;
        if (size_ < buf_.size()) ++size_;
    }

    /// ago = 0 is the newest element; requires ago < size().
    const T& back(std::size_t ago) const noexcept {
        std::size_t idx = head_ + buf_.size() - 1 - ago;
        if (idx >= buf_.size()) idx -= buf_.size();
        return buf_[idx];
    }

    std::size_t size() const noexcept { return size_; }
    std::size_t capacity() const noexcept { return buf_.size(); }
    void clear() noexcept { head_ = size_ = 0; }

private:
    std::vector<T> buf_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
};

/// Sliding-window extremum over a sequence, amortized O(1) per push.
/// Compare = std::greater<> tracks the maximum, std::less<> the minimum.
template <typename T, typename Compare>
class MonotoneWindow {
public:
    explicit MonotoneWindow(std::size_t window) : window_(window) {}

    void push(const T& v) {
        while (!q_.empty() && !cmp_(q_.back().second, v)) q_.pop_back();
        q_.emplace_back(index_, v);
        ++index_;
        while (q_.front().first + window_ <= index_ - 1) q_.pop_front();
    }

    bool full() const noexcept { return index_ >= window_; }
    const T& value() const noexcept { return q_.front().second; }

private:
    std::size_t window_;
    std::size_t index_ = 0;
    std::deque<std::pair<std::size_t, T>> q_;
    Compare cmp_;
};

/// Exponential moving average with alpha = 2 / (n + 1), seeded by the simple mean
/// of the first n inputs. value() is meaningful once ready().
class Ema {
public:
    explicit Ema(std::size_t n) : n_(n), alpha_(2.0 / (static_cast<double>(n) + 1.0)) {}

    void push(double x) noexcept {
        if (count_ < n_) {
            seed_sum_ += x;
            ++count_;
            if (count_ == n_) value_ = seed_sum_ / static_cast<double>(n_);
            return;
        }
        value_ = alpha_ * x + (1.0 - alpha_) * value_;
    }

    bool ready() const noexcept { return count_ >= n_; }
    double value() const noexcept { return value_; }
    double alpha() const noexcept { return alpha_; }

private:
    std::size_t n_;
    double alpha_;
    std::size_t count_ = 0;
    double seed_sum_ = 0;
    double value_ = 0;
};

}  // namespace snapdir::rolling
