#pragma once

// Two reservoirs in cascade: water released by plant 1 reaches reservoir 2
// after a travel delay. State X = (V1, V2, Z1, Z2, R, W): inflows, volumes,
// the electricity price and the volume in transit between the plants.
// A mode is a pair of running-turbine counts.

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "oswitch/controls.hpp"
#include "oswitch/regression.hpp"
#include "oswitch/sdde.hpp"
#include "oswitch/solver.hpp"

namespace oswitch {

namespace hydro {
inline constexpr std::size_t V1 = 0, V2 = 1, Z1 = 2, Z2 = 3, R = 4, W = 5;
}

struct HydroParams {
    std::size_t turbines1 = 1;
    std::size_t turbines2 = 1;
    double discharge1 = 1.0;  ///< release per running turbine, volume per unit time
    double discharge2 = 1.0;
    double power_max1 = 1.0;  ///< p_i(Z) = power_max_i min(1, Z / power_ref_i)
    double power_max2 = 1.0;
    double power_ref1 = 0.5;
    double power_ref2 = 0.5;
    double delay = 0.125;

    // Inflows: dV = theta (mean - V) dt + vol V dW + z dN (compensated, mean absorbed in the drift).
    double inflow_mean1 = 0.5;
    double inflow_mean2 = 0.3;
    double inflow_reversion = 2.0;
    double inflow_vol = 0.3;
    double inflow_jump_intensity = 1.0;
    std::vector<Mark> inflow_marks{{{0.2, 0.1}, 0.5}, {{0.5, 0.2}, 0.5}};

    // Price: geometric Brownian motion.
    double price_drift = 0.0;
    double price_vol = 0.3;

    // Terminal value of stored water per unit volume.
    double water_value1 = 1.6;
    double water_value2 = 0.8;

    // c(b, b') = cost_base + cost_per_turbine (|d xi1| + |d xi2|).
    double cost_base = 0.05;
    double cost_per_turbine = 0.05;

    std::vector<double> initial_state{0.5, 0.3, 1.0, 1.0, 1.0};
    std::size_t initial_turbines1 = 0;
    std::size_t initial_turbines2 = 0;

    /// Optional reservoir capacity; inflow above it is discarded.
    std::optional<double> capacity;

    [[nodiscard]] std::size_t mode_count() const noexcept { return (turbines1 + 1) * (turbines2 + 1); }
    [[nodiscard]] ModeIndex mode_of(std::size_t xi1, std::size_t xi2) const noexcept { return xi1 * (turbines2 + 1) + xi2; }
    [[nodiscard]] std::size_t xi1(ModeIndex b) const noexcept { return b / (turbines2 + 1); }
    [[nodiscard]] std::size_t xi2(ModeIndex b) const noexcept { return b % (turbines2 + 1); }
    /// Smallest cost of a closed switching loop.
    [[nodiscard]] double loop_floor() const noexcept { return 2.0 * (cost_base + cost_per_turbine); }

    /// Returns one message per violated field.
    [[nodiscard]] std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (turbines1 < 1) v.push_back("turbines1: must be at least 1");
        if (turbines2 < 1) v.push_back("turbines2: must be at least 1");
        if (!(discharge1 > 0.0)) v.push_back("discharge1: must be positive");
        if (!(discharge2 > 0.0)) v.push_back("discharge2: must be positive");
        if (!(power_max1 >= 0.0)) v.push_back("power_max1: must be nonnegative");
        if (!(power_max2 >= 0.0)) v.push_back("power_max2: must be nonnegative");
        if (!(power_ref1 > 0.0)) v.push_back("power_ref1: must be positive");
        if (!(power_ref2 > 0.0)) v.push_back("power_ref2: must be positive");
        if (!(delay >= 0.0)) v.push_back("delay: must be nonnegative");
        if (!(inflow_reversion >= 0.0)) v.push_back("inflow_reversion: must be nonnegative");
        if (!(inflow_vol >= 0.0)) v.push_back("inflow_vol: must be nonnegative");
        if (!(inflow_jump_intensity >= 0.0)) v.push_back("inflow_jump_intensity: must be nonnegative");
        if (inflow_jump_intensity > 0.0 && inflow_marks.empty()) v.push_back("inflow_marks: empty");
        double w = 0.0;
        for (const auto& m : inflow_marks) {
            if (m.value.size() != 2) v.push_back("inflow_marks: each mark needs two components");
            w += m.weight;
        }
        if (!inflow_marks.empty() && std::abs(w - 1.0) > 1e-12) v.push_back("inflow_marks: weights must sum to 1");
        if (!(price_vol >= 0.0)) v.push_back("price_vol: must be nonnegative");
        if (!(cost_base >= 0.0)) v.push_back("cost_base: must be nonnegative");
        if (!(cost_per_turbine >= 0.0)) v.push_back("cost_per_turbine: must be nonnegative");
        if (!(loop_floor() > 0.0)) v.push_back("cost_base, cost_per_turbine: switching loops must cost a positive amount");
        if (initial_state.size() != 5) v.push_back("initial_state: needs (V1, V2, Z1, Z2, R)");
        if (initial_turbines1 > turbines1) v.push_back("initial_turbines1: exceeds turbines1");
        if (initial_turbines2 > turbines2) v.push_back("initial_turbines2: exceeds turbines2");
        if (capacity && !(*capacity > 0.0)) v.push_back("capacity: must be positive");
        return v;
    }
};

inline double hydro_power(double z, double pmax, double zref) { return pmax * std::min(1.0, std::max(0.0, z) / zref); }

/// Net reservoir drifts with release suspended on empty reservoirs and,
/// with a capacity, overflow discarded.
struct HydroFlows {
    double release1 = 0.0;   ///< alpha1 xi1(t) 1[Z1(t) > 0]
    double release2 = 0.0;   ///< alpha2 xi2(t) 1[Z2(t) > 0]
    double arriving = 0.0;   ///< alpha1 xi1(t - delay) 1[Z1(t - delay) > 0]
    double dz1 = 0.0;
    double dz2 = 0.0;
};

inline HydroFlows hydro_flows(const HydroParams& hp, std::span<const double> x, std::span<const double> y, ModeView m) {
    using namespace hydro;
    HydroFlows f;
    f.release1 = x[Z1] > 0.0 ? hp.discharge1 * static_cast<double>(hp.xi1(m.current)) : 0.0;
    f.release2 = x[Z2] > 0.0 ? hp.discharge2 * static_cast<double>(hp.xi2(m.current)) : 0.0;
    f.arriving = y[Z1] > 0.0 ? hp.discharge1 * static_cast<double>(hp.xi1(m.delayed)) : 0.0;
    f.dz1 = x[V1] - f.release1;
    f.dz2 = x[V2] - f.release2 + f.arriving;
    if (hp.capacity) {
        if (x[Z1] >= *hp.capacity) f.dz1 = std::min(f.dz1, 0.0);
        if (x[Z2] >= *hp.capacity) f.dz2 = std::min(f.dz2, 0.0);
    }
    return f;
}

inline SwitchingProblem build_hydro_problem(const HydroParams& hp) {
    using namespace hydro;
    if (auto v = hp.violations(); !v.empty()) {
        std::string msg = "hydro parameters invalid:";
        for (const auto& s : v) msg += "\n  " + s;
        throw std::invalid_argument(msg);
    }
    SwitchingProblem p;
    p.name = "hydro";
    p.modes = ModeSet(hp.mode_count(), hp.mode_of(hp.initial_turbines1, hp.initial_turbines2));
    auto& s = p.dynamics;
    s.dim = 6;
    s.brownian_dim = 3;
    s.delay = hp.delay;
    // The initial mode has been in force on [-delay, 0], so that much water is en route.
    std::vector<double> x0 = hp.initial_state;
    x0.push_back(x0[Z1] > 0.0 ? hp.discharge1 * static_cast<double>(hp.initial_turbines1) * hp.delay : 0.0);
    s.initial_segment = SddeSpec::constant_segment(x0);
    s.jump_intensity = hp.inflow_jump_intensity;
    s.marks = hp.inflow_marks;
    double mean_jump1 = 0.0, mean_jump2 = 0.0;
    for (const auto& m : hp.inflow_marks) {
        mean_jump1 += m.weight * m.value[0];
        mean_jump2 += m.weight * m.value[1];
    }
    const double comp1 = hp.inflow_jump_intensity * mean_jump1;
    const double comp2 = hp.inflow_jump_intensity * mean_jump2;
    s.drift = [hp, comp1, comp2](double, std::span<const double> x, std::span<const double> y, ModeView m,
                                 std::span<double> out) {
        const auto f = hydro_flows(hp, x, y, m);
        out[V1] = hp.inflow_reversion * (hp.inflow_mean1 - x[V1]) + comp1;
        out[V2] = hp.inflow_reversion * (hp.inflow_mean2 - x[V2]) + comp2;
        out[Z1] = f.dz1;
        out[Z2] = f.dz2;
        out[R] = hp.price_drift * x[R];
        out[W] = f.release1 - f.arriving;
    };
    s.diffusion = [hp](double, std::span<const double> x, std::span<const double>, ModeView, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        out[V1 * 3 + 0] = hp.inflow_vol * x[V1];
        out[V2 * 3 + 1] = hp.inflow_vol * x[V2];
        out[R * 3 + 2] = hp.price_vol * x[R];
    };
    s.jump_coeff = [](double, std::span<const double>, std::span<const double>, std::span<const double> z, ModeView,
                      std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        out[V1] = z[0];
        out[V2] = z[1];
    };
    s.jump_maps = JumpMapFamily::identity_maps();

    p.reward.running = [hp](double, std::span<const double> x, ModeIndex b) {
        const double prod = static_cast<double>(hp.xi1(b)) * hydro_power(x[Z1], hp.power_max1, hp.power_ref1) +
                            static_cast<double>(hp.xi2(b)) * hydro_power(x[Z2], hp.power_max2, hp.power_ref2);
        return x[R] * prod;
    };
    p.reward.terminal = [hp](std::span<const double> x) {
        return hp.water_value1 * std::max(0.0, x[Z1]) + hp.water_value2 * std::max(0.0, x[Z2]);
    };
    p.reward.growth_q = 2.0;
    p.reward.growth_k = static_cast<double>(hp.turbines1) * hp.power_max1 +
                        static_cast<double>(hp.turbines2) * hp.power_max2 + hp.water_value1 + hp.water_value2;
    p.costs.cost = [hp](ModeIndex b, ModeIndex bp, double) {
        const double d1 = std::abs(static_cast<double>(hp.xi1(b)) - static_cast<double>(hp.xi1(bp)));
        const double d2 = std::abs(static_cast<double>(hp.xi2(b)) - static_cast<double>(hp.xi2(bp)));
        return hp.cost_base + hp.cost_per_turbine * (d1 + d2);
    };
    p.costs.floor = hp.loop_floor();

    // 10 x 10 x 10 lattice of reservoir levels and prices around the inflow means.
    for (int a = 0; a < 10; ++a)
        for (int c = 0; c < 10; ++c)
            for (int r = 0; r < 10; ++r) {
                p.probes.push_back({hp.inflow_mean1, hp.inflow_mean2, 0.3 * a, 0.3 * c, 0.25 + 0.25 * r, x0[W]});
            }
    return p;
}

/// Regression features for the hydro model: the state, with the volume in
/// transit when there is a delay, and the number of plant-1 turbines that
/// were releasing one delay ago.
inline FeatureMap hydro_features(const HydroParams& hp, int degree = 2, bool cross_terms = true) {
    using namespace hydro;
    const bool delayed = hp.delay > 0.0;
    auto raw = [hp, delayed](const FeatureInput& in, std::vector<double>& out) {
        out.resize(delayed ? 7 : 5);
        for (std::size_t j = 0; j < (delayed ? 6u : 5u); ++j) out[j] = in.x[j];
        if (delayed) out[6] = in.y[Z1] > 0.0 ? static_cast<double>(hp.xi1(in.mode.delayed)) : 0.0;
    };
    std::vector<bool> indicator(delayed ? 7 : 5, false);
    if (delayed) indicator[6] = hp.turbines1 == 1;
    return FeatureMap(raw, delayed ? 7 : 5, degree, cross_terms, indicator);
}

struct WaterValuePoint {
    double level = 0.0;
    double value = 0.0;
    double se = 0.0;
};

struct WaterValueCurve {
    std::vector<WaterValuePoint> reservoir1;  ///< Y_0 against the initial Z1
    std::vector<WaterValuePoint> reservoir2;  ///< Y_0 against the initial Z2
    /// Central-difference marginal values at interior matched levels.
    std::vector<double> marginal1, marginal2;
    std::vector<double> marginal_levels;

    [[nodiscard]] bool nondecreasing(double rel_tol = 1e-6) const {
        for (const auto* curve : {&reservoir1, &reservoir2})
            for (std::size_t j = 1; j < curve->size(); ++j) {
                const double prev = (*curve)[j - 1].value;
                if ((*curve)[j].value < prev - rel_tol * std::max(1.0, std::abs(prev))) return false;
            }
        return true;
    }
    [[nodiscard]] bool reservoir1_dominates() const {
        for (std::size_t j = 0; j < marginal1.size(); ++j)
            if (marginal1[j] < marginal2[j]) return false;
        return true;
    }
};

/// Y_0 as a function of the initial volumes, every solve sharing the same
/// seeds so the levels are compared under common random numbers.
inline WaterValueCurve water_value_curve(const HydroParams& base, const TimeGrid& grid, const SolverSettings& settings,
                                         const std::vector<double>& levels, bool both_reservoirs = true) {
    if (levels.empty()) throw std::invalid_argument("water_value_curve: no levels");
    WaterValueCurve out;
    auto run = [&](std::size_t component, double level) {
        HydroParams hp = base;
        hp.initial_state[component] = level;
        auto problem = std::make_shared<const SwitchingProblem>(build_hydro_problem(hp));
        SolverSettings s = settings;
        if (!s.feature_map) s.feature_map = hydro_features(hp);
        const auto surf = solve(problem, grid, s);
        return WaterValuePoint{level, surf.y0(), surf.y0_se()};
    };
    for (double z : levels) out.reservoir1.push_back(run(hydro::Z1, z));
    if (both_reservoirs) {
        for (double z : levels) out.reservoir2.push_back(run(hydro::Z2, z));
        for (std::size_t j = 1; j + 1 < levels.size(); ++j) {
            const double h = levels[j + 1] - levels[j - 1];
            out.marginal_levels.push_back(levels[j]);
            out.marginal1.push_back((out.reservoir1[j + 1].value - out.reservoir1[j - 1].value) / h);
            out.marginal2.push_back((out.reservoir2[j + 1].value - out.reservoir2[j - 1].value) / h);
        }
    }
    return out;
}

}  // namespace oswitch
