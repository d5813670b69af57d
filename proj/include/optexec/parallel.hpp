#ifndef OPTEXEC_PARALLEL_HPP
#define OPTEXEC_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace optexec {

/// Runs fn(i) for i in [0, n) on up to `workers` threads using contiguous
/// blocks. Results must be written to per-index slots so the outcome does not
/// depend on the worker count. The first exception thrown is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(workers > 0 ? workers : 1, n));
    if (w == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr error;
    std::mutex guard;
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (std::size_t k = 0; k < w; ++k) {
        const std::size_t lo = n * k / w, hi = n * (k + 1) / w;
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(guard);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// Pairwise summation over a fixed binary tree; the order of additions
/// depends only on the length of the input.
template <typename It>
double pairwise_sum(It first, std::size_t n) {
    if (n <= 8) {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) s += first[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(first, h) + pairwise_sum(first + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.begin(), v.size()); }

} // namespace optexec

#endif // OPTEXEC_PARALLEL_HPP
