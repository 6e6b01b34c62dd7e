#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace oswitch {

// SplitMix64 finalizer. Used to derive independent per-path seeds from a root
// seed so results do not depend on how paths are scheduled.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed for item `index` of stream `stream` under `root`.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream,
                                    std::uint64_t index) noexcept {
    return splitmix64(splitmix64(root ^ splitmix64(stream)) + index);
}

/// Stream tags for the different consumers of randomness.
namespace streams {
inline constexpr std::uint64_t noise = 1;
inline constexpr std::uint64_t exploration = 2;
inline constexpr std::uint64_t certification = 3;
inline constexpr std::uint64_t probes = 4;
inline constexpr std::uint64_t policy_exploration = 5;
}  // namespace streams

/// Runs f(i) for i in [0, n) on up to `workers` threads. Work is split into
/// fixed contiguous blocks; f must only write to per-index slots.
template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& f) {
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    workers = std::min(workers, n);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    pool.reserve(workers);
    const std::size_t block = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * block;
        const std::size_t hi = std::min(n, lo + block);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, w, &f, &errors] {
            try {
                for (std::size_t i = lo; i < hi; ++i) f(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    // Rethrow the error from the lowest block so the reported failure does not
    // depend on thread timing.
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace oswitch
