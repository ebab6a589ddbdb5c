#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <thread>
#include <vector>

namespace tilt {

// Compensated accumulator (Kahan in the Neumaier variant, pinned to a fixed
// fold order): the running compensation survives addends that swamp the sum.
// Folding the same values in the same order is bit-reproducible.
template <typename T = double>
class KahanSum {
public:
    void add(T value) {
        T t = sum_ + value;
        if (std::abs(sum_) >= std::abs(value))
            comp_ += (sum_ - t) + value;
        else
            comp_ += (value - t) + sum_;
        sum_ = t;
    }

    T value() const { return sum_ + comp_; }

private:
    T sum_ = 0;
    T comp_ = 0;
};

template <typename T>
T kahan_sum(std::span<const T> values) {
    KahanSum<T> acc;
    for (T v : values) acc.add(v);
    return acc.value();
}

inline double kahan_sum(const std::vector<double>& values) {
    return kahan_sum(std::span<const double>(values));
}

namespace detail {

// Reductions are chunked at a fixed width so the combine order never depends
// on the thread count; chunk partials are folded in chunk order.
inline constexpr std::size_t reduce_chunk = 2048;

template <typename Fn>
void run_chunks(std::size_t n_chunks, int threads, Fn&& body) {
    if (threads <= 1 || n_chunks <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) body(c);
        return;
    }
    std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(threads), n_chunks);
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t c = w; c < n_chunks; c += n_workers) body(c);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace detail

// Deterministic sum of f(0..n-1): per-chunk Kahan partials combined in fixed
// chunk order. The result is identical for every thread count.
template <typename Fn>
double deterministic_sum(std::size_t n, Fn&& f, int threads = 1) {
    if (n == 0) return 0.0;
    std::size_t n_chunks = (n + detail::reduce_chunk - 1) / detail::reduce_chunk;
    std::vector<double> partial(n_chunks);
    detail::run_chunks(n_chunks, threads, [&](std::size_t c) {
        std::size_t lo = c * detail::reduce_chunk;
        std::size_t hi = std::min(n, lo + detail::reduce_chunk);
        KahanSum<> acc;
        for (std::size_t i = lo; i < hi; ++i) acc.add(f(i));
        partial[c] = acc.value();
    });
    KahanSum<> total;
    for (double p : partial) total.add(p);
    return total.value();
}

// log((1/n) * sum_i exp(v_i)) with max-subtraction; exact for a constant
// vector. exp arguments are <= 0 so the sum never overflows.
template <typename T>
T log_mean_exp(std::span<const T> values) {
    const std::size_t n = values.size();
    T vmax = *std::max_element(values.begin(), values.end());
    KahanSum<T> acc;
    for (T v : values) acc.add(std::exp(v - vmax));
    return vmax + std::log(acc.value() / static_cast<T>(n));
}

inline double log_mean_exp(const std::vector<double>& values) {
    return log_mean_exp(std::span<const double>(values));
}

// Max-subtracted softmax; weights sum to 1 up to a few ulps of n.
template <typename T>
std::vector<T> softmax(std::span<const T> values) {
    T vmax = *std::max_element(values.begin(), values.end());
    std::vector<T> out(values.size());
    KahanSum<T> acc;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = std::exp(values[i] - vmax);
        acc.add(out[i]);
    }
    T total = acc.value();
    for (T& w : out) w /= total;
    return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    KahanSum<> acc;
    for (std::size_t i = 0; i < a.size(); ++i) acc.add(a[i] * b[i]);
    return acc.value();
}

inline double norm2(std::span<const double> v) {
    KahanSum<> acc;
    for (double x : v) acc.add(x * x);
    return std::sqrt(acc.value());
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace tilt
