#pragma once

// Affine coefficient family with mode-indexed diagonal coefficients, plus the
// small packaged instances used throughout the tests.

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "oswitch/controls.hpp"
#include "oswitch/sdde.hpp"

namespace oswitch {

/// Per-mode, per-component coefficients: table[b][r].
using ModeTable = std::vector<std::vector<double>>;
/// Per-pair coefficients: table[b][b'].
using PairTable = std::vector<std::vector<double>>;

inline ModeTable mode_table(std::size_t m, std::size_t dim, double v = 0.0) {
    return ModeTable(m, std::vector<double>(dim, v));
}

/// Componentwise affine dynamics and quadratic rewards, one Brownian motion
/// per component:
///   a_r     = drift_const + drift_linear x_r + drift_delayed y_r
///   sigma_r = diffusion_const + diffusion_linear x_r
///   gamma_r = (jump_const + jump_linear x_r) z_r   (z_r broadcast from a scalar mark)
///   h_{b,b'}(x)_r = map_scale x_r + map_shift
///   f(t, x, b) = running_const + running_slope t + sum_r (running_linear x_r + running_quadratic x_r^2)
///   g(x)       = terminal_const + sum_r (terminal_linear x_r + terminal_quadratic x_r^2)
///   c_{b,b'}(t) = cost_const + cost_slope t
struct AffineParams {
    std::string name = "affine";
    std::size_t dim = 1;
    std::size_t modes = 2;
    ModeIndex initial_mode = 0;
    double delay = 0.0;
    std::vector<double> initial_state{0.0};

    ModeTable drift_const, drift_linear, drift_delayed;
    ModeTable diffusion_const, diffusion_linear;
    ModeTable jump_const, jump_linear;
    double jump_intensity = 0.0;
    std::vector<Mark> marks;

    PairTable map_scale, map_shift;
    double map_bound = 0.0;
    std::size_t cycle_bound = 2;

    std::vector<double> running_const;
    std::vector<double> running_slope;
    ModeTable running_linear, running_quadratic;
    double terminal_const = 0.0;
    std::vector<double> terminal_linear, terminal_quadratic;

    PairTable cost_const, cost_slope;
    double cost_floor = 0.0;

    double growth_q = 2.0;
    double growth_k = 1.0;

    /// All tables zero-filled to the declared sizes; maps identity.
    static AffineParams zeros(std::size_t dim, std::size_t m) {
        AffineParams p;
        p.dim = dim;
        p.modes = m;
        p.initial_state.assign(dim, 0.0);
        for (auto* t : {&p.drift_const, &p.drift_linear, &p.drift_delayed, &p.diffusion_const, &p.diffusion_linear,
                        &p.jump_const, &p.jump_linear, &p.running_linear, &p.running_quadratic}) {
            *t = mode_table(m, dim);
        }
        p.map_scale = PairTable(m, std::vector<double>(m, 1.0));
        p.map_shift = PairTable(m, std::vector<double>(m, 0.0));
        p.running_const.assign(m, 0.0);
        p.running_slope.assign(m, 0.0);
        p.terminal_linear.assign(dim, 0.0);
        p.terminal_quadratic.assign(dim, 0.0);
        p.cost_const = PairTable(m, std::vector<double>(m, 0.0));
        p.cost_slope = PairTable(m, std::vector<double>(m, 0.0));
        return p;
    }

    void validate() const {
        auto check_modes = [&](const ModeTable& t, const char* what) {
            if (t.size() != modes) throw std::invalid_argument(std::string("affine: ") + what + " needs one row per mode");
            for (const auto& row : t)
                if (row.size() != dim) throw std::invalid_argument(std::string("affine: ") + what + " needs one entry per component");
        };
        auto check_pairs = [&](const PairTable& t, const char* what) {
            if (t.size() != modes) throw std::invalid_argument(std::string("affine: ") + what + " must be m x m");
            for (const auto& row : t)
                if (row.size() != modes) throw std::invalid_argument(std::string("affine: ") + what + " must be m x m");
        };
        if (dim == 0) throw std::invalid_argument("affine: dim must be positive");
        if (modes < 2) throw std::invalid_argument("affine: at least two modes are required");
        if (initial_mode >= modes) throw std::invalid_argument("affine: initial mode out of range");
        if (initial_state.size() != dim) throw std::invalid_argument("affine: initial_state has wrong length");
        check_modes(drift_const, "drift_const");
        check_modes(drift_linear, "drift_linear");
        check_modes(drift_delayed, "drift_delayed");
        check_modes(diffusion_const, "diffusion_const");
        check_modes(diffusion_linear, "diffusion_linear");
        check_modes(jump_const, "jump_const");
        check_modes(jump_linear, "jump_linear");
        check_modes(running_linear, "running_linear");
        check_modes(running_quadratic, "running_quadratic");
        check_pairs(map_scale, "map_scale");
        check_pairs(map_shift, "map_shift");
        check_pairs(cost_const, "cost_const");
        check_pairs(cost_slope, "cost_slope");
        if (running_const.size() != modes || running_slope.size() != modes) {
            throw std::invalid_argument("affine: running_const/running_slope need one entry per mode");
        }
        if (terminal_linear.size() != dim || terminal_quadratic.size() != dim) {
            throw std::invalid_argument("affine: terminal coefficients need one entry per component");
        }
        for (const auto& mk : marks)
            if (mk.value.size() != 1 && mk.value.size() != dim) {
                throw std::invalid_argument("affine: marks must be scalar or have one entry per component");
            }
    }
};

inline SwitchingProblem build_affine_problem(const AffineParams& a) {
    a.validate();
    SwitchingProblem p;
    p.name = a.name;
    p.modes = ModeSet(a.modes, a.initial_mode);
    auto& s = p.dynamics;
    s.dim = a.dim;
    s.brownian_dim = a.dim;
    s.delay = a.delay;
    s.initial_segment = SddeSpec::constant_segment(a.initial_state);
    s.drift = [a](double, std::span<const double> x, std::span<const double> y, ModeView m, std::span<double> out) {
        for (std::size_t r = 0; r < a.dim; ++r) {
            out[r] = a.drift_const[m.current][r] + a.drift_linear[m.current][r] * x[r] +
                     a.drift_delayed[m.current][r] * y[r];
        }
    };
    s.diffusion = [a](double, std::span<const double> x, std::span<const double>, ModeView m, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t r = 0; r < a.dim; ++r) {
            out[r * a.dim + r] = a.diffusion_const[m.current][r] + a.diffusion_linear[m.current][r] * x[r];
        }
    };
    s.jump_intensity = a.jump_intensity;
    s.marks = a.marks;
    s.jump_coeff = [a](double, std::span<const double> x, std::span<const double>, std::span<const double> z,
                       ModeView m, std::span<double> out) {
        for (std::size_t r = 0; r < a.dim; ++r) {
            const double zr = z.size() == 1 ? z[0] : z[r];
            out[r] = (a.jump_const[m.current][r] + a.jump_linear[m.current][r] * x[r]) * zr;
        }
    };
    bool identity = true;
    for (std::size_t b = 0; b < a.modes; ++b)
        for (std::size_t bp = 0; bp < a.modes; ++bp)
            if (b != bp && (a.map_scale[b][bp] != 1.0 || a.map_shift[b][bp] != 0.0)) identity = false;
    s.jump_maps.identity = identity;
    s.jump_maps.bound = a.map_bound;
    s.jump_maps.cycle_bound = a.cycle_bound;
    s.jump_maps.map = [a](ModeIndex from, ModeIndex to, double, std::span<const double> x, std::span<double> out) {
        for (std::size_t r = 0; r < a.dim; ++r) out[r] = a.map_scale[from][to] * x[r] + a.map_shift[from][to];
    };

    p.reward.running = [a](double t, std::span<const double> x, ModeIndex b) {
        double v = a.running_const[b] + a.running_slope[b] * t;
        for (std::size_t r = 0; r < a.dim; ++r) v += a.running_linear[b][r] * x[r] + a.running_quadratic[b][r] * x[r] * x[r];
        return v;
    };
    p.reward.terminal = [a](std::span<const double> x) {
        double v = a.terminal_const;
        for (std::size_t r = 0; r < a.dim; ++r) v += a.terminal_linear[r] * x[r] + a.terminal_quadratic[r] * x[r] * x[r];
        return v;
    };
    p.reward.growth_q = a.growth_q;
    p.reward.growth_k = a.growth_k;
    p.costs = SwitchingCostModel::affine(a.cost_const, a.cost_slope, a.cost_floor);

    // Probe states around the initial state.
    for (double d : {-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0}) {
        std::vector<double> x = a.initial_state;
        for (auto& v : x) v += d;
        p.probes.push_back(std::move(x));
    }
    return p;
}

// ---------------------------------------------------------------------------
// Packaged instances
// ---------------------------------------------------------------------------

namespace instances {

/// Two modes with running rates 0 and 1, no dynamics, g = 0, c = 0.3.
inline AffineParams two_mode_deterministic_params() {
    auto a = AffineParams::zeros(1, 2);
    a.name = "two_mode_deterministic";
    a.running_const = {0.0, 1.0};
    a.cost_const = {{0.0, 0.3}, {0.3, 0.0}};
    a.cost_floor = 0.6;
    a.growth_q = 1.0;
    a.growth_k = 2.0;
    return a;
}

inline SwitchingProblem two_mode_deterministic() { return build_affine_problem(two_mode_deterministic_params()); }

/// Mode-independent GBM-driven rewards with positive switching costs: switching never pays.
inline AffineParams pure_cost_params(std::size_t m = 3) {
    auto a = AffineParams::zeros(1, m);
    a.name = "pure_cost";
    a.initial_state = {1.0};
    for (std::size_t b = 0; b < m; ++b) {
        a.drift_linear[b][0] = 0.05;
        a.diffusion_linear[b][0] = 0.2;
        a.running_linear[b][0] = 1.0;
        for (std::size_t bp = 0; bp < m; ++bp) a.cost_const[b][bp] = b == bp ? 0.0 : 0.2;
    }
    a.terminal_linear = {1.0};
    a.cost_floor = 0.4;
    a.growth_q = 2.0;
    a.growth_k = 3.0;
    return a;
}

inline SwitchingProblem pure_cost(std::size_t m = 3) { return build_affine_problem(pure_cost_params(m)); }

/// Geometric Brownian motion dX = mu X dt + sigma X dW with two identical modes.
inline AffineParams gbm_params(double mu = 0.1, double sigma = 0.2, double x0 = 1.0) {
    auto a = AffineParams::zeros(1, 2);
    a.name = "gbm";
    a.initial_state = {x0};
    for (std::size_t b = 0; b < 2; ++b) {
        a.drift_linear[b][0] = mu;
        a.diffusion_linear[b][0] = sigma;
        a.running_linear[b][0] = 1.0;
    }
    a.cost_const = {{0.0, 0.1}, {0.1, 0.0}};
    a.cost_floor = 0.2;
    a.growth_q = 2.0;
    a.growth_k = 2.0;
    return a;
}

inline SwitchingProblem gbm(double mu = 0.1, double sigma = 0.2, double x0 = 1.0) {
    return build_affine_problem(gbm_params(mu, sigma, x0));
}

/// x'(t) = -x(t - 1), x = 1 on [-1, 0].
inline AffineParams delayed_ode_params() {
    auto a = AffineParams::zeros(1, 2);
    a.name = "delayed_ode";
    a.delay = 1.0;
    a.initial_state = {1.0};
    a.drift_delayed = {{-1.0}, {-1.0}};
    a.cost_const = {{0.0, 1.0}, {1.0, 0.0}};
    a.cost_floor = 2.0;
    return a;
}

/// Closed form of the delayed ODE on [0, 2].
inline double delayed_ode_solution(double t) {
    if (t <= 1.0) return 1.0 - t;
    return 1.0 - t + 0.5 * (t - 1.0) * (t - 1.0);
}

/// Small stochastic switching instance for tree/oracle comparisons: scalar
/// affine dynamics with mild mode dependence, running rewards that favour
/// different modes in different regions, identity jump maps.
inline AffineParams random_tree_params(std::uint64_t seed, std::size_t m, std::size_t n_steps, double horizon,
                                       bool delayed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto a = AffineParams::zeros(1, m);
    a.name = "random_tree_" + std::to_string(seed);
    a.initial_state = {0.5 + u(gen)};
    a.delay = delayed ? horizon / static_cast<double>(n_steps) : 0.0;
    for (std::size_t b = 0; b < m; ++b) {
        a.drift_const[b][0] = -0.5 + u(gen);
        a.drift_linear[b][0] = -0.3 * u(gen);
        if (delayed) a.drift_delayed[b][0] = -0.5 + u(gen);
        a.diffusion_const[b][0] = 0.2 + 0.4 * u(gen);
        a.diffusion_linear[b][0] = 0.1 * u(gen);
        a.running_const[b] = 0.5 + u(gen);
        a.running_linear[b][0] = -1.0 + 2.0 * u(gen);
        a.running_quadratic[b][0] = -0.2 * u(gen);
        for (std::size_t bp = 0; bp < m; ++bp) a.cost_const[b][bp] = b == bp ? 0.0 : 0.02 + 0.1 * u(gen);
    }
    a.terminal_const = 0.5;
    a.terminal_linear = {0.5 * u(gen)};
    double floor = 1e9;
    for (std::size_t b = 0; b < m; ++b)
        for (std::size_t bp = 0; bp < m; ++bp)
            if (b != bp) floor = std::min(floor, a.cost_const[b][bp]);
    a.cost_floor = 2.0 * floor;
    a.growth_q = 2.0;
    a.growth_k = 10.0;
    return a;
}

}  // namespace instances

}  // namespace oswitch
