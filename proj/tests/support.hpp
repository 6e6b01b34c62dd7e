#pragma once

// Shared test helpers: closed-form references computed independently of the
// library, refinement studies and small problem builders.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "oswitch/affine.hpp"
#include "oswitch/sdde.hpp"
#include "oswitch/snell.hpp"

namespace testsupport {

using namespace oswitch;

/// Solution of x'(t) = -x(t - 1) with x = 1 on [-1, 0], by the method of steps.
inline double delayed_ode_exact(double t) {
    if (t <= 1.0) return 1.0 - t;
    const double s = t - 1.0;
    return 1.0 - t + 0.5 * s * s;
}

/// GBM at T from its Brownian endpoint.
inline double gbm_exact(double x0, double mu, double sigma, double t, double w) {
    return x0 * std::exp((mu - 0.5 * sigma * sigma) * t + sigma * w);
}

/// Least-squares slope of y against x.
inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

struct OrderStudy {
    std::vector<std::size_t> steps;
    std::vector<double> errors;
    double slope = 0.0;  ///< -d log2(error) / d log2(steps)
};

/// Strong error E|X_T^n - X_T| of the Euler scheme for GBM on a common set of
/// Brownian paths: fine increments are summed onto each coarser grid.
inline OrderStudy gbm_strong_order(std::vector<std::size_t> levels, std::size_t n_paths, std::uint64_t seed,
                                   double mu = 0.1, double sigma = 0.2, double horizon = 1.0) {
    const auto spec = build_affine_problem(instances::gbm_params(mu, sigma, 1.0)).dynamics;
    const std::size_t fine = levels.back();
    for (auto n : levels)
        if (fine % n != 0) throw std::invalid_argument("gbm_strong_order: levels must divide the finest");
    std::vector<double> err(levels.size(), 0.0);
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double dt_fine = horizon / static_cast<double>(fine);
    std::vector<double> dw(fine);
    for (std::size_t p = 0; p < n_paths; ++p) {
        double w = 0.0;
        for (auto& v : dw) {
            v = normal(gen) * std::sqrt(dt_fine);
            w += v;
        }
        const double exact = gbm_exact(1.0, mu, sigma, horizon, w);
        for (std::size_t l = 0; l < levels.size(); ++l) {
            const std::size_t n = levels[l], agg = fine / n;
            const TimeGrid grid(horizon, n);
            auto noise = NoiseDraw::zero(n, 1);
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < agg; ++j) s += dw[i * agg + j];
                noise.increments[i] = s;
            }
            const auto path = simulate_path(spec, grid, 0, {}, noise);
            err[l] += std::abs(path.state(static_cast<std::ptrdiff_t>(n))[0] - exact) / static_cast<double>(n_paths);
        }
    }
    OrderStudy r;
    r.steps = levels;
    r.errors = err;
    std::vector<double> lx, ly;
    for (std::size_t l = 0; l < levels.size(); ++l) {
        lx.push_back(std::log2(static_cast<double>(levels[l])));
        ly.push_back(std::log2(err[l]));
    }
    r.slope = -ls_slope(lx, ly);
    return r;
}

/// Max-over-grid error of the scheme on the delayed ODE, T = 2.
inline double delayed_ode_max_error(std::size_t n) {
    const auto p = build_affine_problem(instances::delayed_ode_params());
    const TimeGrid grid(2.0, n);
    const auto path = simulate_path(p.dynamics, grid, 0, {}, NoiseDraw::zero(n, p.dynamics.brownian_dim));
    double e = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        e = std::max(e, std::abs(path.state(static_cast<std::ptrdiff_t>(i))[0] - delayed_ode_exact(grid.time(i))));
    }
    return e;
}

inline OrderStudy delayed_ode_order(std::vector<std::size_t> levels) {
    OrderStudy r;
    r.steps = levels;
    std::vector<double> lx, ly;
    for (auto n : levels) {
        r.errors.push_back(delayed_ode_max_error(n));
        lx.push_back(std::log2(static_cast<double>(n)));
        ly.push_back(std::log2(r.errors.back()));
    }
    r.slope = -ls_slope(lx, ly);
    return r;
}

/// Random tree with `levels` levels below the root; branching drawn from
/// [1, max_branching] per node and random transition probabilities.
inline ScenarioTree random_tree(std::mt19937_64& gen, std::size_t levels, std::size_t max_branching) {
    std::uniform_int_distribution<std::size_t> kids(1, max_branching);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    ScenarioTree tree({0.0});
    std::vector<std::size_t> frontier{0};
    for (std::size_t l = 0; l < levels; ++l) {
        std::vector<std::size_t> next;
        for (auto node : frontier) {
            const std::size_t k = kids(gen);
            std::vector<double> w(k);
            double total = 0.0;
            for (auto& v : w) total += (v = u(gen));
            double acc = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                // The last child takes the remainder so the sum is one to rounding.
                const double p = c + 1 == k ? 1.0 - acc : w[c] / total;
                acc += p;
                next.push_back(tree.add_child(node, p, {static_cast<double>(c)}));
            }
        }
        frontier = std::move(next);
    }
    return tree;
}

inline TreeProcess random_process(std::mt19937_64& gen, const ScenarioTree& tree, double scale = 5.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    TreeProcess v(tree.size());
    for (auto& x : v) x = u(gen);
    return v;
}

/// A supermartingale dominating `payoff`, built backward: at each node the
/// maximum of the payoff and the child expectation, plus nonnegative slack.
inline TreeProcess random_dominating_supermartingale(std::mt19937_64& gen, const ScenarioTree& tree,
                                                     const TreeProcess& payoff) {
    std::exponential_distribution<double> slack(2.0);
    TreeProcess w(tree.size());
    for (std::size_t i = tree.size(); i-- > 0;) {
        double base = payoff[i];
        if (!tree.is_leaf(i)) base = std::max(base, conditional_expectation(tree, w, i));
        w[i] = base + slack(gen);
    }
    return w;
}

}  // namespace testsupport
