#pragma once

// Switching problems: costs, rewards, the standing-assumption validators and
// Monte Carlo evaluation of the reward functional J(u).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "oswitch/control.hpp"
#include "oswitch/grid.hpp"
#include "oswitch/rng.hpp"
#include "oswitch/sdde.hpp"
#include "oswitch/stats.hpp"

namespace oswitch {

using CostFn = std::function<double(ModeIndex from, ModeIndex to, double t)>;

/// Deterministic switching costs c_{b,b'}(t) >= 0 with a declared no-free-loop floor.
struct SwitchingCostModel {
    CostFn cost;
    double floor = 0.0;

    [[nodiscard]] double operator()(ModeIndex from, ModeIndex to, double t) const {
        return cost(from, to, t);
    }

    static SwitchingCostModel constant(double c, double floor) {
        return {[c](ModeIndex, ModeIndex, double) { return c; }, floor};
    }

    /// c_{b,b'}(t) = level[b][b'] + slope[b][b'] * t.
    static SwitchingCostModel affine(std::vector<std::vector<double>> level,
                                     std::vector<std::vector<double>> slope, double floor) {
        return {[level = std::move(level), slope = std::move(slope)](ModeIndex b, ModeIndex bp, double t) {
                    return level.at(b).at(bp) + slope.at(b).at(bp) * t;
                },
                floor};
    }
};

using RunningFn = std::function<double(double t, std::span<const double> x, ModeIndex mode)>;
using TerminalFn = std::function<double(std::span<const double> x)>;

/// Running reward f(t, x, b), terminal reward g(x), and the declared growth
/// bound |f| + |g| <= K (1 + |x|^q).
struct RewardSpec {
    RunningFn running;
    TerminalFn terminal;
    double growth_q = 2.0;
    double growth_k = 1.0;
};

/// A complete optimal switching problem over a controlled SDDE.
struct SwitchingProblem {
    std::string name;
    SddeSpec dynamics;
    ModeSet modes;
    SwitchingCostModel costs;
    RewardSpec reward;
    /// States at which sampling-based validators probe the assumptions.
    std::vector<std::vector<double>> probes;
};

// ---------------------------------------------------------------------------
// Validators. Each returns std::nullopt when no violation was found on the
// probe set, or a witness otherwise.
// ---------------------------------------------------------------------------

struct ControlViolation {
    std::size_t index = 0;
    std::string message;
};

inline std::optional<ControlViolation> validate_control(const SwitchingControl& u, const ModeSet& modes,
                                                        const TimeGrid& grid) {
    ModeIndex prev = modes.initial;
    double prev_t = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < u.switches.size(); ++j) {
        const auto& s = u.switches[j];
        if (!grid.index_of(s.time)) return ControlViolation{j, "switch time not on the grid"};
        if (s.time < prev_t) return ControlViolation{j, "times not nondecreasing"};
        if (!modes.contains(s.target)) return ControlViolation{j, "target mode out of range"};
        if (s.target == prev) return ControlViolation{j, "target mode equals previous mode"};
        prev = s.target;
        prev_t = s.time;
    }
    return std::nullopt;
}

/// The cheapest closed loop b_1 -> ... -> b_n -> b_1 over nondecreasing times.
struct LoopReport {
    double min_sum = std::numeric_limits<double>::infinity();
    std::vector<ModeIndex> cycle;  ///< b_1, ..., b_n, b_1
    std::vector<double> times;     ///< t_1 <= ... <= t_n
    double floor = 0.0;

    [[nodiscard]] bool ok() const noexcept { return min_sum >= floor; }
};

/// Exhaustive search over simple mode cycles (length <= m) and nondecreasing
/// time assignments drawn from `time_samples`. For a fixed cycle the minimum
/// over time assignments is found by a monotone dynamic program over the
/// sorted samples.
inline LoopReport minimum_loop_cost(const SwitchingCostModel& costs, const ModeSet& modes,
                                    std::vector<double> time_samples) {
    const std::size_t m = modes.count;
    if (m > 8) throw std::invalid_argument("validate_no_free_loop: at most 8 modes supported");
    std::sort(time_samples.begin(), time_samples.end());
    time_samples.erase(std::unique(time_samples.begin(), time_samples.end()), time_samples.end());
    if (time_samples.empty()) throw std::invalid_argument("validate_no_free_loop: no time samples");
    const std::size_t S = time_samples.size();

    std::vector<double> table(m * m * S, 0.0);
    auto at = [&](ModeIndex b, ModeIndex bp, std::size_t s) -> double& { return table[(b * m + bp) * S + s]; };
    for (ModeIndex b = 0; b < m; ++b)
        for (ModeIndex bp = 0; bp < m; ++bp)
            if (b != bp)
                for (std::size_t s = 0; s < S; ++s) at(b, bp, s) = costs(b, bp, time_samples[s]);

    LoopReport best;
    best.floor = costs.floor;
    std::vector<ModeIndex> seq;
    std::vector<bool> used(m, false);
    std::vector<double> dp(S), next(S);
    std::vector<std::vector<std::size_t>> arg;

    auto evaluate = [&] {
        const std::size_t n = seq.size();
        arg.assign(n, std::vector<std::size_t>(S, 0));
        // dp[s] = cheapest prefix with the j-th switch at sample s.
        for (std::size_t s = 0; s < S; ++s) dp[s] = at(seq[0], seq[1 % n], s);
        for (std::size_t j = 1; j < n; ++j) {
            double run = std::numeric_limits<double>::infinity();
            std::size_t run_arg = 0;
            for (std::size_t s = 0; s < S; ++s) {
                if (dp[s] < run) {
                    run = dp[s];
                    run_arg = s;
                }
                next[s] = run + at(seq[j], seq[(j + 1) % n], s);
                arg[j][s] = run_arg;
            }
            std::swap(dp, next);
        }
        const auto it = std::min_element(dp.begin(), dp.end());
        if (*it < best.min_sum) {
            best.min_sum = *it;
            best.cycle = seq;
            best.cycle.push_back(seq.front());
            best.times.assign(n, 0.0);
            std::size_t s = static_cast<std::size_t>(it - dp.begin());
            for (std::size_t j = n; j-- > 0;) {
                best.times[j] = time_samples[s];
                s = arg[j][s];
            }
        }
    };

    std::function<void()> extend = [&] {
        if (seq.size() >= 2) evaluate();
        if (seq.size() == m) return;
        for (ModeIndex b = 0; b < m; ++b) {
            if (used[b]) continue;
            used[b] = true;
            seq.push_back(b);
            extend();
            seq.pop_back();
            used[b] = false;
        }
    };
    extend();
    return best;
}

inline std::optional<LoopReport> validate_no_free_loop(const SwitchingCostModel& costs, const ModeSet& modes,
                                                       std::vector<double> time_samples) {
    auto report = minimum_loop_cost(costs, modes, std::move(time_samples));
    if (report.ok()) return std::nullopt;
    return report;
}

/// Sampled check that costs are nonnegative and finite.
inline std::optional<std::string> validate_cost_sign(const SwitchingCostModel& costs, const ModeSet& modes,
                                                     std::span<const double> time_samples) {
    for (ModeIndex b = 0; b < modes.count; ++b)
        for (ModeIndex bp = 0; bp < modes.count; ++bp) {
            if (b == bp) continue;
            for (double t : time_samples) {
                const double c = costs(b, bp, t);
                if (!(c >= 0.0) || !std::isfinite(c)) {
                    return "negative or non-finite cost c[" + std::to_string(b) + "][" + std::to_string(bp) +
                           "] at t=" + std::to_string(t);
                }
            }
        }
    return std::nullopt;
}

struct TerminalWitness {
    std::vector<double> state;
    ModeIndex from = 0;
    ModeIndex to = 0;
    double stay = 0.0;    ///< g(x)
    double switch_value = 0.0;  ///< g(h(T, x)) - c(T)
};

/// Checks g(x) > g(h_{b,b'}(T, x)) - c_{b,b'}(T) for every probe state and mode pair.
inline std::optional<TerminalWitness> validate_terminal_no_switch(const SwitchingProblem& p, double horizon,
                                                                  std::span<const std::vector<double>> probes) {
    std::vector<double> hx(p.dynamics.dim);
    for (const auto& x : probes) {
        const double stay = p.reward.terminal(x);
        for (ModeIndex b = 0; b < p.modes.count; ++b)
            for (ModeIndex bp = 0; bp < p.modes.count; ++bp) {
                if (b == bp) continue;
                p.dynamics.jump_maps.apply(b, bp, horizon, x, hx);
                const double sw = p.reward.terminal(hx) - p.costs(b, bp, horizon);
                if (!(stay > sw)) return TerminalWitness{x, b, bp, stay, sw};
            }
    }
    return std::nullopt;
}

/// Composition h_{b1,b2}(t, h_{b2,b3}(t, ... h_{b_{j-1},b_j}(t, x))).
inline std::vector<double> compose_jump_maps(const JumpMapFamily& h, std::span<const ModeIndex> chain, double t,
                                             std::span<const double> x) {
    std::vector<double> cur(x.begin(), x.end()), buf(x.size());
    for (std::size_t j = chain.size(); j-- > 1;) {
        h.apply(chain[j - 1], chain[j], t, cur, buf);
        std::swap(cur, buf);
    }
    return cur;
}

struct CycleWitness {
    std::vector<ModeIndex> chain;
};

/// For mode chains of length kappa+1 .. kappa+3, searches a subsequence of
/// length <= kappa keeping the first and last mode whose composed jump map
/// agrees with the full composition on every probe and time sample. A chain
/// that starts and ends in the same mode also reduces to the empty
/// composition (the identity). Chains are enumerated exhaustively up to
/// `max_chains` per length and sampled uniformly (seeded) beyond that.
inline std::optional<CycleWitness> validate_cycle_reduction(const JumpMapFamily& h, const ModeSet& modes,
                                                            std::span<const std::vector<double>> probes,
                                                            std::span<const double> times, std::size_t kappa,
                                                            std::uint64_t seed = 7, std::size_t max_chains = 4096) {
    const std::size_t m = modes.count;
    if (m > 5) throw std::invalid_argument("validate_cycle_reduction: at most 5 modes supported");
    if (kappa < 1) throw std::invalid_argument("validate_cycle_reduction: kappa must be positive");

    auto agrees = [&](std::span<const ModeIndex> full, std::span<const ModeIndex> sub) {
        for (double t : times)
            for (const auto& x : probes) {
                const auto a = compose_jump_maps(h, full, t, x);
                const auto b = sub.size() <= 1 ? std::vector<double>(x.begin(), x.end())
                                               : compose_jump_maps(h, sub, t, x);
                for (std::size_t r = 0; r < a.size(); ++r) {
                    if (std::abs(a[r] - b[r]) > 1e-9 * (1.0 + std::abs(a[r]))) return false;
                }
            }
        return true;
    };

    auto reducible = [&](const std::vector<ModeIndex>& chain) {
        const std::size_t j = chain.size();
        if (chain.front() == chain.back() && agrees(chain, std::span<const ModeIndex>(chain.data(), 1))) return true;
        // Subsets of the interior positions 1..j-2 of size <= kappa-2.
        const std::size_t interior = j - 2;
        const std::size_t max_inner = kappa >= 2 ? kappa - 2 : 0;
        if (kappa < 2) return false;
        std::vector<ModeIndex> sub;
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << interior); ++mask) {
            if (static_cast<std::size_t>(std::popcount(mask)) > max_inner) continue;
            sub.clear();
            sub.push_back(chain.front());
            for (std::size_t r = 0; r < interior; ++r)
                if (mask & (std::uint64_t{1} << r)) sub.push_back(chain[r + 1]);
            sub.push_back(chain.back());
            bool admissible = true;
            for (std::size_t r = 1; r < sub.size(); ++r) admissible = admissible && sub[r] != sub[r - 1];
            if (admissible && agrees(chain, sub)) return true;
        }
        return false;
    };

    std::mt19937_64 gen(seed);
    for (std::size_t len = kappa + 1; len <= kappa + 3; ++len) {
        if (len < 2) continue;
        // number of admissible chains m (m-1)^(len-1)
        double total = static_cast<double>(m) * std::pow(static_cast<double>(m - 1), static_cast<double>(len - 1));
        std::vector<ModeIndex> chain(len);
        if (total <= static_cast<double>(max_chains)) {
            std::function<std::optional<CycleWitness>(std::size_t)> rec = [&](std::size_t pos) -> std::optional<CycleWitness> {
                if (pos == len) {
                    if (!reducible(chain)) return CycleWitness{chain};
                    return std::nullopt;
                }
                for (ModeIndex b = 0; b < m; ++b) {
                    if (pos > 0 && b == chain[pos - 1]) continue;
                    chain[pos] = b;
                    if (auto w = rec(pos + 1)) return w;
                }
                return std::nullopt;
            };
            if (auto w = rec(0)) return w;
        } else {
            std::uniform_int_distribution<ModeIndex> any(0, m - 1), other(0, m - 2);
            for (std::size_t c = 0; c < max_chains; ++c) {
                chain[0] = any(gen);
                for (std::size_t r = 1; r < len; ++r) {
                    const ModeIndex o = other(gen);
                    chain[r] = o >= chain[r - 1] ? o + 1 : o;
                }
                if (!reducible(chain)) return CycleWitness{chain};
            }
        }
    }
    return std::nullopt;
}

struct GrowthWitness {
    std::vector<double> state;
    double time = 0.0;
    ModeIndex mode = 0;
    double value = 0.0;
    double bound = 0.0;
};

/// |f(t,x,b)| + |g(x)| <= K (1 + |x|^q) on the probes.
inline std::optional<GrowthWitness> validate_growth(const SwitchingProblem& p, std::span<const double> times,
                                                    std::span<const std::vector<double>> probes) {
    for (const auto& x : probes) {
        double norm = 0.0;
        for (double v : x) norm += v * v;
        norm = std::sqrt(norm);
        const double bound = p.reward.growth_k * (1.0 + std::pow(norm, p.reward.growth_q));
        const double g = std::abs(p.reward.terminal(x));
        for (double t : times)
            for (ModeIndex b = 0; b < p.modes.count; ++b) {
                const double v = std::abs(p.reward.running(t, x, b)) + g;
                if (!(v <= bound)) return GrowthWitness{x, t, b, v, bound};
            }
    }
    return std::nullopt;
}

struct JumpBoundWitness {
    std::vector<double> state;
    ModeIndex from = 0;
    ModeIndex to = 0;
    double norm_after = 0.0;
};

/// |h_{b,b'}(t,x)| <= C v |x| on the probes.
inline std::optional<JumpBoundWitness> validate_jump_bound(const JumpMapFamily& h, const ModeSet& modes,
                                                           std::span<const double> times,
                                                           std::span<const std::vector<double>> probes) {
    std::vector<double> out;
    for (const auto& x : probes) {
        out.resize(x.size());
        double nx = 0.0;
        for (double v : x) nx += v * v;
        nx = std::sqrt(nx);
        for (double t : times)
            for (ModeIndex b = 0; b < modes.count; ++b)
                for (ModeIndex bp = 0; bp < modes.count; ++bp) {
                    if (b == bp) continue;
                    h.apply(b, bp, t, x, out);
                    double nh = 0.0;
                    for (double v : out) nh += v * v;
                    nh = std::sqrt(nh);
                    if (nh > std::max(h.bound, nx) * (1.0 + 1e-12) + 1e-12) return JumpBoundWitness{x, b, bp, nh};
                }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Reward functional
// ---------------------------------------------------------------------------

/// Realized reward of one path: Psi = sum_i f(t_i, X_i, mode_i) dt + g(X_T)
/// (left-endpoint quadrature) and the switching costs actually paid.
struct PathReward {
    double gross = 0.0;
    double costs = 0.0;
    std::size_t switches = 0;

    [[nodiscard]] double net() const noexcept { return gross - costs; }
};

inline PathReward path_reward(const SwitchingProblem& p, const TimeGrid& grid, const Path& path) {
    PathReward r;
    const double dt = grid.dt();
    for (std::size_t i = 0; i < grid.n_steps(); ++i) {
        r.gross += p.reward.running(grid.time(i), path.state(static_cast<std::ptrdiff_t>(i)), path.mode(static_cast<std::ptrdiff_t>(i))) * dt;
    }
    r.gross += p.reward.terminal(path.state(static_cast<std::ptrdiff_t>(grid.n_steps())));
    for (const auto& e : path.events()) {
        r.costs += p.costs(e.from, e.to, grid.time(e.step));
        ++r.switches;
    }
    return r;
}

/// J(u) estimated over n_paths paths driven by per-path seeds derived from `seed`.
inline McEstimate evaluate_reward(const SwitchingProblem& p, const TimeGrid& grid, const SwitchingControl& u,
                                  std::size_t n_paths, std::uint64_t seed, NoiseModel model = {},
                                  std::size_t workers = 1) {
    if (auto v = validate_control(u, p.modes, grid)) {
        throw std::invalid_argument("evaluate_reward: inadmissible control: " + v->message);
    }
    if (n_paths == 0) throw std::invalid_argument("evaluate_reward: n_paths must be positive");
    std::vector<double> samples(n_paths);
    parallel_for(n_paths, workers, [&](std::size_t s) {
        const auto noise = sample_noise(p.dynamics, grid, derive_seed(seed, streams::noise, s), model);
        const auto path = simulate_path(p.dynamics, grid, p.modes.initial, u, noise);
        samples[s] = path_reward(p, grid, path).net();
    });
    return summarize(samples);
}

}  // namespace oswitch
