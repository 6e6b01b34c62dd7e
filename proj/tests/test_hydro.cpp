#include <gtest/gtest.h>

#include "oswitch/controls.hpp"
#include "oswitch/hydro.hpp"
#include "oswitch/solver.hpp"

using namespace oswitch;
using namespace oswitch::hydro;

namespace {

HydroParams quiet() {
    HydroParams hp;
    hp.inflow_vol = 0.0;
    hp.inflow_jump_intensity = 0.0;
    hp.inflow_marks.clear();
    hp.price_vol = 0.0;
    return hp;
}

double at(const Path& p, std::size_t i, std::size_t c) { return p.state(static_cast<std::ptrdiff_t>(i))[c]; }

}  // namespace

TEST(Hydro, ModeIndexing) {
    HydroParams hp;
    hp.turbines1 = 2;
    hp.turbines2 = 1;
    EXPECT_EQ(hp.mode_count(), 6u);
    for (std::size_t a = 0; a <= 2; ++a)
        for (std::size_t b = 0; b <= 1; ++b) {
            const auto m = hp.mode_of(a, b);
            EXPECT_EQ(hp.xi1(m), a);
            EXPECT_EQ(hp.xi2(m), b);
        }
    EXPECT_EQ(build_hydro_problem(hp).modes.count, 6u);
}

TEST(Hydro, ViolationsNameEachField) {
    HydroParams hp;
    hp.turbines1 = 0;
    hp.discharge2 = -1.0;
    hp.initial_state = {1.0};
    const auto v = hp.violations();
    ASSERT_EQ(v.size(), 3u);
    EXPECT_EQ(v[0].rfind("turbines1", 0), 0u);
    EXPECT_EQ(v[1].rfind("discharge2", 0), 0u);
    EXPECT_EQ(v[2].rfind("initial_state", 0), 0u);
    EXPECT_THROW((void)build_hydro_problem(hp), std::invalid_argument);
    EXPECT_TRUE(HydroParams{}.violations().empty());
}

TEST(Hydro, DryReservoirsEarnOnlyCosts) {
    auto hp = quiet();
    hp.inflow_mean1 = hp.inflow_mean2 = 0.0;
    hp.initial_state = {0.0, 0.0, 0.0, 0.0, 1.0};
    const auto p = build_hydro_problem(hp);
    const TimeGrid grid(1.0, 32);
    SwitchingControl u{{{0.0, hp.mode_of(1, 1)}, {0.5, hp.mode_of(0, 1)}, {0.75, hp.mode_of(0, 0)}}};
    const auto j = evaluate_reward(p, grid, u, 4, 1);
    const double costs = p.costs(hp.mode_of(0, 0), hp.mode_of(1, 1), 0.0) + 2.0 * (hp.cost_base + hp.cost_per_turbine);
    EXPECT_NEAR(j.mean, -costs, 1e-14);
    EXPECT_EQ(j.se, 0.0);
}

TEST(Hydro, BalancedInflowGivesConstantPower) {
    auto hp = quiet();
    hp.inflow_mean1 = hp.discharge1;
    hp.inflow_mean2 = 0.0;
    hp.water_value1 = hp.water_value2 = 0.0;
    hp.power_max1 = 0.75;
    hp.initial_state = {hp.discharge1, 0.0, 1.0, 0.0, 1.0};
    hp.initial_turbines1 = 1;
    const auto p = build_hydro_problem(hp);
    const TimeGrid grid(2.0, 64);
    const auto j = evaluate_reward(p, grid, {}, 2, 1);
    EXPECT_NEAR(j.mean, 0.75 * 2.0, 1e-12);
}

TEST(Hydro, ReleasedWaterArrivesAfterTheDelay) {
    auto hp = quiet();
    hp.inflow_mean1 = hp.inflow_mean2 = 0.0;
    hp.initial_state = {0.0, 0.0, 5.0, 0.0, 1.0};
    const auto p = build_hydro_problem(hp);
    const TimeGrid grid(1.0, 64);
    const double s = 0.25;
    SwitchingControl u{{{0.0, hp.mode_of(1, 0)}, {s, hp.mode_of(0, 0)}}};
    const auto path = simulate_path(p.dynamics, grid, p.modes.initial, u, NoiseDraw::zero(64, 3));
    for (std::size_t i = 0; i <= 64; ++i) {
        const double t = grid.time(i);
        const double arrived = hp.discharge1 * std::clamp(t - hp.delay, 0.0, s);
        const double released = hp.discharge1 * std::min(t, s);
        EXPECT_NEAR(at(path, i, Z2), arrived, 1e-12) << t;
        EXPECT_NEAR(at(path, i, Z1), 5.0 - released, 1e-12) << t;
        EXPECT_NEAR(at(path, i, W), released - arrived, 1e-12) << t;
    }
}

TEST(Hydro, MassBalanceAlongRandomPaths) {
    HydroParams hp;
    hp.turbines1 = 2;
    const auto p = build_hydro_problem(hp);
    const TimeGrid grid(1.0, 64);
    SwitchingControl u{{{0.0, hp.mode_of(2, 1)}, {grid.time(19), hp.mode_of(1, 0)}, {grid.time(38), hp.mode_of(0, 1)}}};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto noise = sample_noise(p.dynamics, grid, seed);
        const auto path = simulate_path(p.dynamics, grid, p.modes.initial, u, noise);
        const std::ptrdiff_t lag = static_cast<std::ptrdiff_t>(path.lag());
        const double start = at(path, 0, Z1) + at(path, 0, Z2) + at(path, 0, W);
        double net_in = 0.0, worst = 0.0;
        for (std::size_t i = 0; i < 64; ++i) {
            const auto ii = static_cast<std::ptrdiff_t>(i);
            const auto f = hydro_flows(hp, path.state(ii), path.state(ii - lag), path.mode_view(i));
            net_in += grid.dt() * (at(path, i, V1) + at(path, i, V2) - f.release2);
            const double total = at(path, i + 1, Z1) + at(path, i + 1, Z2) + at(path, i + 1, W);
            worst = std::max(worst, std::abs(total - start - net_in));
        }
        EXPECT_LT(worst, 1e-12) << seed;
    }
}

TEST(Hydro, FeaturesIncludeTransitVolumeWhenDelayed) {
    HydroParams hp;
    EXPECT_EQ(hydro_features(hp).raw_dim(), 7u);
    hp.delay = 0.0;
    EXPECT_EQ(hydro_features(hp).raw_dim(), 5u);
}

TEST(Hydro, WithoutPriceWaterKeepsItsTerminalValue) {
    auto hp = quiet();
    hp.price_drift = 0.0;
    hp.initial_state[R] = 0.0;
    const TimeGrid grid(1.0, 16);
    SolverSettings s;
    s.k_max = 2;
    s.n_paths = 2000;
    s.seed = 5;
    const auto curve = water_value_curve(hp, grid, s, {0.5, 1.0, 1.5});
    ASSERT_EQ(curve.marginal1.size(), 1u);
    EXPECT_NEAR(curve.marginal1[0], hp.water_value1, 1e-9);
    EXPECT_NEAR(curve.marginal2[0], hp.water_value2, 1e-9);
    EXPECT_TRUE(curve.nondecreasing());
    EXPECT_TRUE(curve.reservoir1_dominates());
}

TEST(Hydro, CapacityDiscardsOverflow) {
    auto hp = quiet();
    hp.capacity = 1.0;
    hp.inflow_mean1 = 2.0;
    hp.initial_state = {2.0, 0.0, 0.9, 0.0, 1.0};
    const auto p = build_hydro_problem(hp);
    const TimeGrid grid(1.0, 64);
    const auto path = simulate_path(p.dynamics, grid, p.modes.initial, {}, NoiseDraw::zero(64, 3));
    for (std::size_t i = 0; i <= 64; ++i) EXPECT_LE(at(path, i, Z1), 1.0 + 2.0 * grid.dt());
    EXPECT_NEAR(at(path, 64, Z1), at(path, 63, Z1), 1e-15);
}
