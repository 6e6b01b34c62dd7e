#pragma once

// Regression Monte Carlo for optimal switching with a Picard iteration over
// the switch budget k:
//
//   Y^0_i(x, b)  = f(t_i, x, b) dt + E[Y^0_{i+1}(X_{i+1}, b) | x]
//   Y^k_i(x, b)  = max( f(t_i, x, b) dt + E[Y^k_{i+1}(X_{i+1}, b) | x],
//                       max_{b' != b} -c_{b,b'}(t_i) + Y^{k-1}_i(h_{b,b'}(t_i, x), b') )
//   Y^k_n(x, b)  = g(x)
//
// Conditional expectations are one-step regressions on polynomial features
// of (X_t, X_{t-delay}). Training states come from one pooled ensemble whose
// paths start in every mode and are perturbed by random exploratory
// switches. Without delay (or a one-step delay) every training state is
// propagated one step in mode b with the path's own noise to fit the surface
// of mode b; with longer delays the surface of b is fitted on the paths that
// are in b at t_i. Later rounds replace half of the ensemble by paths driven
// by the policy of the previous round.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "oswitch/controls.hpp"
#include "oswitch/regression.hpp"
#include "oswitch/rng.hpp"
#include "oswitch/sdde.hpp"
#include "oswitch/stats.hpp"

namespace oswitch {

struct SolverSettings {
    std::size_t k_max = 4;
    std::size_t n_paths = 10000;
    std::uint64_t seed = 0;
    FeatureOptions features;
    /// Overrides `features` when set.
    std::optional<FeatureMap> feature_map;
    /// Probability of a random exploratory switch per step in the training ensembles.
    double exploration = 0.1;
    NoiseModel noise;
    std::size_t workers = 1;
    /// Stop once max |Y^k - Y^{k-1}| over the probes drops below tol * (1 + |Y_0|).
    double picard_tol = 1e-3;
    bool early_stop = true;
    std::size_t probes_per_step = 32;
    /// Upper bound on switches at one instant; 0 picks useful_switch_depth.
    std::size_t max_switches_per_instant = 0;
    /// Refits on an ensemble where every other path follows the previous
    /// round's policy (with exploration), so the states it visits are covered.
    std::size_t policy_rounds = 1;
};

/// Diagnostics of one Picard pass.
struct PicardRecord {
    std::size_t k = 0;
    double y0 = 0.0;
    double y0_se = 0.0;
    double max_gap = 0.0;  ///< max over probes of Y^k - Y^{k-1}
    double min_gap = 0.0;
    std::size_t monotone_violations = 0;  ///< probes with Y^k < Y^{k-1} - 3 SE
    std::size_t probes = 0;
    double mean_residual = 0.0;
    std::size_t ridge_fits = 0;
    std::size_t fits = 0;
};

struct ValueEstimate {
    double value = 0.0;
    double se = 0.0;
};

/// The state a value is evaluated at. For zero delay `y` and
/// `delayed_mode` are ignored (they coincide with the current state and mode).
struct StateRef {
    std::span<const double> x;
    std::span<const double> y;
    ModeIndex delayed_mode = 0;
};

class ValueSurface;

namespace detail {
inline ValueSurface fit_surface(std::shared_ptr<const SwitchingProblem> problem, const TimeGrid& grid,
                         const SolverSettings& s, const FeatureMap& fm, std::size_t depth,
                         const std::vector<NoiseDraw>& noise, const std::vector<Path>& ensemble);
}

class ValueSurface {
public:
    ValueSurface(std::shared_ptr<const SwitchingProblem> problem, TimeGrid grid, FeatureMap features,
                 std::size_t depth_cap)
        : problem_(std::move(problem)), grid_(grid), features_(std::move(features)),
          lag_(grid.steps_for(problem_->dynamics.delay)), depth_cap_(depth_cap) {}

    [[nodiscard]] const SwitchingProblem& problem() const noexcept { return *problem_; }
    [[nodiscard]] std::shared_ptr<const SwitchingProblem> problem_ptr() const noexcept { return problem_; }
    [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] const FeatureMap& features() const noexcept { return features_; }
    [[nodiscard]] std::size_t lag() const noexcept { return lag_; }
    [[nodiscard]] std::size_t depth_cap() const noexcept { return depth_cap_; }
    [[nodiscard]] std::size_t k_top() const noexcept { return fits_.empty() ? 0 : fits_.size() - 1; }
    [[nodiscard]] bool converged() const noexcept { return converged_; }
    [[nodiscard]] const std::vector<PicardRecord>& history() const noexcept { return history_; }
    [[nodiscard]] const std::vector<std::string>& warnings() const noexcept { return warnings_; }
    [[nodiscard]] double y0() const { return history_.at(k_top()).y0; }
    [[nodiscard]] double y0_se() const { return history_.at(k_top()).y0_se; }
    /// Root value with budget k (capped at the top budget).
    [[nodiscard]] double y0(std::size_t k) const { return history_.at(std::min(k, k_top())).y0; }
    [[nodiscard]] double y0_se(std::size_t k) const { return history_.at(std::min(k, k_top())).y0_se; }

    [[nodiscard]] const LinearFit& fit(std::size_t k, std::size_t i, ModeIndex b) const {
        return fits_.at(k).at(i).at(b);
    }

    /// f(t_i, x, b) dt + fitted E[Y^k_{i+1} | state] for i < n. A larger
    /// budget can always be left unused, so the fit for k is never allowed
    /// below those for smaller budgets.
    [[nodiscard]] ValueEstimate continuation(std::size_t i, ModeIndex b, std::size_t k, const StateRef& s,
                                             bool want_se = true) const {
        thread_local std::vector<double> raw, phi;
        phi.resize(features_.size());
        const auto in = feature_input(i, b, s);
        features_.evaluate(in, raw, phi);
        const LinearFit* best = &fits_.at(k)[i][b];
        double v = best->predict(phi);
        for (std::size_t j = 0; j < k; ++j) {
            const auto& f = fits_[j][i][b];
            const double w = f.predict(phi);
            if (w > v) {
                v = w;
                best = &f;
            }
        }
        const double running = problem_->reward.running(grid_.time(i), s.x, b) * grid_.dt();
        return {running + v, want_se ? best->prediction_se(phi) : 0.0};
    }

    /// Y^k_i(x, b), allowing at most `depth` further switches at t_i.
    [[nodiscard]] ValueEstimate value(std::size_t i, ModeIndex b, std::size_t k, const StateRef& s,
                                      std::size_t depth, bool want_se = true) const {
        if (i == grid_.n_steps()) return {problem_->reward.terminal(s.x), 0.0};
        k = std::min(k, k_top());
        ValueEstimate best = continuation(i, b, k, s, want_se);
        if (k == 0 || depth == 0) return best;
        const auto& p = *problem_;
        const double t = grid_.time(i);
        std::vector<double> hx(s.x.size());
        for (ModeIndex to = 0; to < p.modes.count; ++to) {
            if (to == b) continue;
            p.dynamics.jump_maps.apply(b, to, t, s.x, hx);
            auto v = value(i, to, k - 1, StateRef{hx, lag_ == 0 ? std::span<const double>(hx) : s.y, s.delayed_mode},
                           depth - 1, want_se);
            v.value -= p.costs(b, to, t);
            if (v.value > best.value) best = v;
        }
        return best;
    }

    [[nodiscard]] ValueEstimate value(std::size_t i, ModeIndex b, std::size_t k, const StateRef& s) const {
        return value(i, b, k, s, depth_cap_);
    }

    /// Targets of the switches the surface prescribes at t_i from mode b with
    /// `budget` switches left. Continues on ties; never switches at T.
    [[nodiscard]] std::vector<ModeIndex> decide(std::size_t i, ModeIndex b, std::size_t budget, StateRef s) const {
        std::vector<ModeIndex> out;
        if (i >= grid_.n_steps()) return out;
        const auto& p = *problem_;
        const double t = grid_.time(i);
        std::size_t k = std::min(budget, k_top());
        std::size_t depth = depth_cap_;
        std::vector<double> cur(s.x.begin(), s.x.end()), hx(s.x.size()), best_x;
        ModeIndex mode = b;
        while (k > 0 && depth > 0) {
            const StateRef here{cur, lag_ == 0 ? std::span<const double>(cur) : s.y, s.delayed_mode};
            const double stay = continuation(i, mode, k, here, false).value;
            double best = stay;
            std::optional<ModeIndex> target;
            for (ModeIndex to = 0; to < p.modes.count; ++to) {
                if (to == mode) continue;
                p.dynamics.jump_maps.apply(mode, to, t, cur, hx);
                const StateRef after{hx, lag_ == 0 ? std::span<const double>(hx) : s.y, s.delayed_mode};
                const double v = -p.costs(mode, to, t) + value(i, to, k - 1, after, depth - 1, false).value;
                if (v > best) {
                    best = v;
                    target = to;
                    best_x = hx;
                }
            }
            if (!target) break;
            out.push_back(*target);
            mode = *target;
            cur = best_x;
            --k;
            --depth;
        }
        return out;
    }

private:
    friend ValueSurface detail::fit_surface(std::shared_ptr<const SwitchingProblem>, const TimeGrid&,
                                            const SolverSettings&, const FeatureMap&, std::size_t,
                                            const std::vector<NoiseDraw>&, const std::vector<Path>&);

    [[nodiscard]] FeatureInput feature_input(std::size_t i, ModeIndex b, const StateRef& s) const {
        if (lag_ == 0) return {grid_.time(i), s.x, s.x, {b, b}};
        return {grid_.time(i), s.x, s.y, {b, s.delayed_mode}};
    }

    std::shared_ptr<const SwitchingProblem> problem_;
    TimeGrid grid_;
    FeatureMap features_;
    std::size_t lag_ = 0;
    std::size_t depth_cap_ = 1;
    std::vector<std::vector<std::vector<LinearFit>>> fits_;  // [k][i][b]
    std::vector<PicardRecord> history_;
    std::vector<std::string> warnings_;
    bool converged_ = false;
};

/// Switches at one instant worth considering. With identity jump maps and
/// costs obeying the triangle inequality c(b,b'') <= c(b,b') + c(b',b'') on
/// the grid, a chain of switches is never better than its direct
/// replacement, so one switch suffices; otherwise m - 1.
inline std::size_t useful_switch_depth(const SwitchingProblem& p, const TimeGrid& grid) {
    const std::size_t m = p.modes.count;
    if (!p.dynamics.jump_maps.identity) return m - 1;
    for (std::size_t i = 0; i <= grid.n_steps(); ++i) {
        const double t = grid.time(i);
        for (ModeIndex a = 0; a < m; ++a)
            for (ModeIndex b = 0; b < m; ++b)
                for (ModeIndex c = 0; c < m; ++c) {
                    if (a == b || b == c) continue;
                    const double chain = p.costs(a, b, t) + p.costs(b, c, t);
                    const double direct = a == c ? 0.0 : p.costs(a, c, t);
                    if (direct > chain) return m - 1;
                }
    }
    return 1;
}

namespace detail {

/// One pooled training ensemble: path s enters mode s mod m at t = 0 and then
/// switches to a uniformly chosen other mode with probability `exploration`
/// per step. All mode surfaces are fitted on the same states, so each one is
/// only ever evaluated where it was trained.
inline std::vector<Path> training_ensemble(const SwitchingProblem& p, const TimeGrid& grid,
                                           const std::vector<NoiseDraw>& noise, const SolverSettings& s) {
    std::vector<Path> paths(noise.size());
    const std::size_t m = p.modes.count;
    parallel_for(noise.size(), s.workers, [&](std::size_t idx) {
        std::mt19937_64 gen(derive_seed(s.seed, streams::exploration, idx));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::uniform_int_distribution<ModeIndex> other(0, m - 2);
        const ModeIndex start = idx % m;
        paths[idx] = simulate_with(p.dynamics, grid, p.modes.initial, noise[idx],
                                   [&](std::size_t i, const Path&, ModeIndex cur, std::vector<ModeIndex>& out) {
                                       if (i == 0) {
                                           if (start != cur) out.push_back(start);
                                           return;
                                       }
                                       if (i >= grid.n_steps() || s.exploration <= 0.0) return;
                                       if (unif(gen) < s.exploration) {
                                           const ModeIndex o = other(gen);
                                           out.push_back(o >= cur ? o + 1 : o);
                                       }
                                   });
    });
    return paths;
}

}  // namespace detail

namespace detail {

/// Replaces the paths with idx mod 2m < m by paths that enter mode idx mod m
/// at t = 0 and then follow `surf`, overridden by a random switch with
/// probability `exploration` per step.
inline void policy_ensemble(const ValueSurface& surf, const TimeGrid& grid, const std::vector<NoiseDraw>& noise,
                            const SolverSettings& s, std::vector<Path>& paths) {
    const auto& p = surf.problem();
    const std::size_t m = p.modes.count;
    const std::size_t lag = surf.lag();
    parallel_for(noise.size(), s.workers, [&](std::size_t idx) {
        if (idx % (2 * m) >= m) return;
        std::mt19937_64 gen(derive_seed(s.seed, streams::policy_exploration, idx));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::uniform_int_distribution<ModeIndex> other(0, m - 2);
        const ModeIndex start = idx % m;
        std::size_t used = 0;
        paths[idx] = simulate_with(
            p.dynamics, grid, p.modes.initial, noise[idx],
            [&](std::size_t i, const Path& path, ModeIndex cur, std::vector<ModeIndex>& out) {
                if (i == 0) {
                    if (start != cur) out.push_back(start);
                    return;
                }
                if (i >= grid.n_steps()) return;
                if (s.exploration > 0.0 && unif(gen) < s.exploration) {
                    const ModeIndex o = other(gen);
                    out.push_back(o >= cur ? o + 1 : o);
                    return;
                }
                const auto ii = static_cast<std::ptrdiff_t>(i);
                const auto back = ii - static_cast<std::ptrdiff_t>(lag);
                const std::size_t left = surf.k_top() > used ? surf.k_top() - used : 0;
                out = surf.decide(i, cur, left, StateRef{path.state(ii), path.state(back), path.mode(back)});
                used += out.size();
            });
    });
}

}  // namespace detail

/// Backward regression Monte Carlo with Picard iteration over the switch budget.
inline ValueSurface solve(std::shared_ptr<const SwitchingProblem> problem, const TimeGrid& grid,
                          const SolverSettings& s) {
    const auto& p = *problem;
    p.dynamics.validate();
    if (s.k_max < 1) throw std::invalid_argument("solve: k_max must be at least 1");
    if (s.n_paths < 2) throw std::invalid_argument("solve: need at least two paths");
    if (!(s.exploration >= 0.0 && s.exploration <= 1.0)) {
        throw std::invalid_argument("solve: exploration must lie in [0, 1]");
    }
    const std::size_t lag = grid.steps_for(p.dynamics.delay);
    const std::size_t depth =
        s.max_switches_per_instant == 0 ? useful_switch_depth(p, grid) : s.max_switches_per_instant;
    FeatureMap fm = s.feature_map ? *s.feature_map : FeatureMap(p.dynamics.dim, lag > 0, s.features);

    std::vector<NoiseDraw> noise(s.n_paths);
    parallel_for(s.n_paths, s.workers, [&](std::size_t idx) {
        noise[idx] = sample_noise(p.dynamics, grid, derive_seed(s.seed, streams::noise, idx), s.noise);
    });
    auto ensemble = detail::training_ensemble(p, grid, noise, s);
    auto surf = detail::fit_surface(problem, grid, s, fm, depth, noise, ensemble);
    for (std::size_t r = 0; r < s.policy_rounds; ++r) {
        detail::policy_ensemble(surf, grid, noise, s, ensemble);
        surf = detail::fit_surface(problem, grid, s, fm, depth, noise, ensemble);
    }
    return surf;
}

namespace detail {

inline ValueSurface fit_surface(std::shared_ptr<const SwitchingProblem> problem, const TimeGrid& grid,
                                const SolverSettings& s, const FeatureMap& fm, std::size_t depth,
                                const std::vector<NoiseDraw>& noise, const std::vector<Path>& ensemble) {
    const auto& p = *problem;
    const std::size_t m = p.modes.count;
    const std::size_t n = grid.n_steps();
    const std::size_t lag = grid.steps_for(p.dynamics.delay);
    ValueSurface surf(problem, grid, fm, depth);
    const std::size_t nf = fm.size();

    std::vector<double> x0(p.dynamics.dim), y0(p.dynamics.dim);
    p.dynamics.initial_segment(0.0, x0);
    p.dynamics.initial_segment(-p.dynamics.delay, y0);
    const StateRef root_state{x0, y0, p.modes.initial};

    std::vector<double> design(s.n_paths * nf), target(s.n_paths);
    const std::size_t n_probe = std::min(s.probes_per_step, s.n_paths);

    // With a delay of two or more steps the mode chosen at t_i is read back
    // after t_{i+1}, so a hypothetical one-step deviation would be forgotten.
    // The surface of mode b is then fitted on the paths that really are in b
    // at t_i, continuing along their own history.
    const bool matched = lag >= 2;
    std::vector<std::vector<std::vector<std::size_t>>> members;  // [i][b] -> path indices
    if (matched) {
        members.assign(n, std::vector<std::vector<std::size_t>>(m));
        for (std::size_t idx = 0; idx < s.n_paths; ++idx)
            for (std::size_t i = 0; i < n; ++i) members[i][ensemble[idx].mode(static_cast<std::ptrdiff_t>(i))].push_back(idx);
        for (std::size_t i = 0; i < n; ++i)
            for (ModeIndex b = 0; b < m; ++b)
                if (members[i][b].size() < std::max<std::size_t>(2 * nf, 16)) {
                    throw std::invalid_argument("solve: too few training paths in mode " + std::to_string(b) +
                                                " at step " + std::to_string(i) +
                                                "; raise n_paths or exploration");
                }
    }

    for (std::size_t k = 0; k <= s.k_max; ++k) {
        surf.fits_.emplace_back(n, std::vector<LinearFit>(m));
        PicardRecord rec;
        rec.k = k;
        double resid_sum = 0.0;
        for (std::size_t i = n; i-- > 0;) {
            for (ModeIndex b = 0; b < m; ++b) {
                const std::size_t rows = matched ? members[i][b].size() : s.n_paths;
                parallel_for(rows, s.workers, [&](std::size_t row) {
                    thread_local std::vector<double> raw;
                    const std::size_t idx = matched ? members[i][b][row] : row;
                    const Path& path = ensemble[idx];
                    const auto ii = static_cast<std::ptrdiff_t>(i);
                    const auto x = path.state(ii);
                    const auto y = lag == 0 ? x : path.delayed_state(i);
                    const ModeIndex dm = lag == 0 ? b : path.mode(ii - static_cast<std::ptrdiff_t>(lag));
                    const FeatureInput in{grid.time(i), x, y, {b, dm}};
                    fm.evaluate(in, raw, std::span<double>(design.data() + row * nf, nf));

                    if (matched) {
                        const StateRef next{path.state(ii + 1), path.delayed_state(i + 1),
                                            path.mode(ii + 1 - static_cast<std::ptrdiff_t>(lag))};
                        target[row] = surf.value(i + 1, b, k, next, depth, false).value;
                        return;
                    }
                    thread_local std::vector<double> xn;
                    xn.resize(p.dynamics.dim);
                    StepWorkspace ws(p.dynamics);
                    euler_step(p.dynamics, grid.time(i), grid.dt(), x, y, {b, dm}, noise[idx].dw(i),
                               noise[idx].jumps(i), xn, ws);
                    if (state_diverged(xn)) throw SimulationDiverged(i + 1);
                    // Delayed quantities seen from t_{i+1}.
                    std::span<const double> yn = xn;
                    ModeIndex dmn = b;
                    if (lag > 0) {
                        yn = x;
                        dmn = b;
                    }
                    target[row] = surf.value(i + 1, b, k, StateRef{xn, yn, dmn}, depth, false).value;
                });
                auto f = LinearFit::fit(std::span<const double>(design.data(), rows * nf), nf,
                                        std::span<const double>(target.data(), rows));
                if (!f.finite()) throw std::runtime_error("solve: non-finite regression coefficients");
                rec.ridge_fits += f.ridge() ? 1 : 0;
                ++rec.fits;
                resid_sum += f.residual_rms();
                surf.fits_[k][i][b] = std::move(f);
            }
        }
        rec.mean_residual = resid_sum / static_cast<double>(n * m);
        surf.history_.push_back(rec);  // k_top() now equals k
        const auto root_value = surf.value(0, p.modes.initial, k, root_state);
        surf.history_.back().y0 = root_value.value;
        surf.history_.back().y0_se = root_value.se;

        if (k >= 1) {
            auto& r = surf.history_.back();
            double max_gap = -std::numeric_limits<double>::infinity();
            double min_gap = std::numeric_limits<double>::infinity();
            std::size_t violations = 0, probes = 0;
            auto probe = [&](std::size_t i, ModeIndex b, const StateRef& st) {
                const auto hi = surf.value(i, b, k, st);
                const auto lo = surf.value(i, b, k - 1, st);
                const double gap = hi.value - lo.value;
                const double se = std::sqrt(hi.se * hi.se + lo.se * lo.se);
                max_gap = std::max(max_gap, gap);
                min_gap = std::min(min_gap, gap);
                if (gap < -3.0 * se - 1e-12) ++violations;
                ++probes;
            };
            probe(0, p.modes.initial, root_state);
            for (std::size_t i = 0; i < n; ++i)
                for (ModeIndex b = 0; b < m; ++b)
                    for (std::size_t idx = 0; idx < n_probe; ++idx) {
                        const Path& path = ensemble[idx];
                        const auto ii = static_cast<std::ptrdiff_t>(i);
                        const ModeIndex dm = lag == 0 ? b : path.mode(ii - static_cast<std::ptrdiff_t>(lag));
                        probe(i, b, StateRef{path.state(ii), path.delayed_state(i), dm});
                    }
            r.max_gap = max_gap;
            r.min_gap = min_gap;
            r.monotone_violations = violations;
            r.probes = probes;
            const double scale = std::max(std::abs(max_gap), std::abs(min_gap));
            if (s.early_stop && scale < s.picard_tol * (1.0 + std::abs(r.y0))) {
                surf.converged_ = true;
                break;
            }
        }
    }
    if (!surf.converged_) {
        const auto& r = surf.history_.back();
        surf.warnings_.push_back("Picard iteration reached k_max=" + std::to_string(s.k_max) +
                                 " without converging; last probe gap " +
                                 std::to_string(std::max(std::abs(r.max_gap), std::abs(r.min_gap))));
    }
    std::size_t ridge = 0;
    for (const auto& r : surf.history_) ridge += r.ridge_fits;
    if (ridge > 0) {
        surf.warnings_.push_back(std::to_string(ridge) + " rank-deficient regressions solved with ridge fallback");
    }
    return surf;
}

}  // namespace detail

/// Adapted switching rule read off a solved surface: switch iff the best
/// intervention value strictly exceeds the continuation value.
class Policy {
public:
    explicit Policy(std::shared_ptr<const ValueSurface> surface) : surface_(std::move(surface)) {}

    [[nodiscard]] const ValueSurface& surface() const noexcept { return *surface_; }
    [[nodiscard]] std::size_t initial_budget() const noexcept { return surface_->k_top(); }

    [[nodiscard]] std::vector<ModeIndex> decide(std::size_t i, ModeIndex mode, std::size_t budget,
                                                const StateRef& s) const {
        return surface_->decide(i, mode, budget, s);
    }

    /// Decisions along a partially simulated path at grid index i.
    [[nodiscard]] std::vector<ModeIndex> decide(std::size_t i, const Path& path, ModeIndex mode,
                                                std::size_t budget) const {
        const auto ii = static_cast<std::ptrdiff_t>(i);
        const auto lag = static_cast<std::ptrdiff_t>(path.lag());
        return decide(i, mode, budget, StateRef{path.state(ii), path.state(ii - lag), path.mode(ii - lag)});
    }

private:
    std::shared_ptr<const ValueSurface> surface_;
};

inline Policy extract_policy(std::shared_ptr<const ValueSurface> surface) {
    if (!surface->converged() && surface->k_top() < surface->problem().modes.count) {
        throw std::invalid_argument("extract_policy: unconverged surface needs k_max >= number of modes");
    }
    return Policy(std::move(surface));
}

struct Certificate {
    McEstimate lower_bound;  ///< J(policy) on independent paths
    double y0 = 0.0;
    double y0_se = 0.0;
    double gap = 0.0;     ///< Y_0 - J(policy)
    double gap_se = 0.0;  ///< combined SE of both estimates
    std::vector<std::size_t> switch_histogram;
    std::size_t max_switches = 0;
    std::size_t terminal_switches = 0;
    std::size_t terminal_evaluations = 0;
    double gross_min = 0.0;  ///< range of the realized pre-cost rewards
    double gross_max = 0.0;
};

/// Largest switch count compatible with the no-free-loop floor:
/// m (range of the pre-cost rewards) / floor + m.
inline double switch_count_bound(const Certificate& c, std::size_t modes, double floor) {
    if (!(floor > 0.0)) return std::numeric_limits<double>::infinity();
    return static_cast<double>(modes) * (c.gross_max - c.gross_min) / floor + static_cast<double>(modes);
}

/// Acceptance window for the gap: [-se_mult SE, rel |Y_0| + se_mult SE],
/// widened by a rounding allowance of 1e-9 (1 + |Y_0|).
struct GapCheck {
    double lower = 0.0;
    double upper = 0.0;
    bool ok = false;
};

inline GapCheck check_gap(const Certificate& c, double rel = 0.02, double se_mult = 3.0) {
    const double fp = 1e-9 * (1.0 + std::abs(c.y0));
    GapCheck g;
    g.lower = -se_mult * c.gap_se - fp;
    g.upper = rel * std::abs(c.y0) + se_mult * c.gap_se + fp;
    g.ok = c.gap >= g.lower && c.gap <= g.upper;
    return g;
}

/// Resimulates independent paths under the policy and reports the lower bound.
inline Certificate certify(const Policy& policy, const SwitchingProblem& p, const TimeGrid& grid,
                           std::size_t n_paths, std::uint64_t seed, std::uint64_t training_seed,
                           NoiseModel model = {}, std::size_t workers = 1) {
    if (seed == training_seed) throw std::invalid_argument("certify: certification seed must differ from the training seed");
    if (n_paths == 0) throw std::invalid_argument("certify: n_paths must be positive");
    const std::size_t n = grid.n_steps();
    std::vector<double> net(n_paths), gross(n_paths);
    std::vector<std::size_t> switches(n_paths), terminal(n_paths);
    parallel_for(n_paths, workers, [&](std::size_t s) {
        const auto noise = sample_noise(p.dynamics, grid, derive_seed(seed, streams::certification, s), model);
        std::size_t used = 0;
        const std::size_t budget = policy.initial_budget();
        const auto path = simulate_with(p.dynamics, grid, p.modes.initial, noise,
                                        [&](std::size_t i, const Path& partial, ModeIndex cur, std::vector<ModeIndex>& out) {
                                            out = policy.decide(i, partial, cur, budget - used);
                                            used += out.size();
                                            if (i == n) terminal[s] = out.size();
                                        });
        const auto r = path_reward(p, grid, path);
        net[s] = r.net();
        gross[s] = r.gross;
        switches[s] = r.switches;
    });
    Certificate c;
    c.lower_bound = summarize(net);
    c.y0 = policy.surface().y0();
    c.y0_se = policy.surface().y0_se();
    c.gap = c.y0 - c.lower_bound.mean;
    c.gap_se = std::sqrt(c.y0_se * c.y0_se + c.lower_bound.se * c.lower_bound.se);
    for (auto k : switches) {
        if (c.switch_histogram.size() <= k) c.switch_histogram.resize(k + 1, 0);
        ++c.switch_histogram[k];
        c.max_switches = std::max(c.max_switches, k);
    }
    for (auto t : terminal) c.terminal_switches += t;
    c.terminal_evaluations = n_paths;
    c.gross_min = *std::min_element(gross.begin(), gross.end());
    c.gross_max = *std::max_element(gross.begin(), gross.end());
    return c;
}

}  // namespace oswitch
