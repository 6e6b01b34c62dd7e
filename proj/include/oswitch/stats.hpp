#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

namespace oswitch {

/// Monte Carlo mean with its sample standard error.
struct McEstimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

/// Two-pass mean and standard error of `samples`.
inline McEstimate summarize(std::span<const double> samples) {
    if (samples.empty()) throw std::invalid_argument("summarize: no samples");
    const auto n = samples.size();
    const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
    if (*lo == *hi) return {*lo, 0.0, n};
    double sum = 0.0;
    for (double v : samples) sum += v;
    const double mean = sum / static_cast<double>(n);
    if (n < 2) return {mean, 0.0, n};
    double ss = 0.0;
    for (double v : samples) ss += (v - mean) * (v - mean);
    const double var = ss / static_cast<double>(n - 1);
    return {mean, std::sqrt(var / static_cast<double>(n)), n};
}

}  // namespace oswitch
