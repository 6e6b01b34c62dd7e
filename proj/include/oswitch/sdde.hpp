#pragma once

// Controlled jump-SDDE simulation: Euler scheme with an exact finite-sum
// compensator, delayed lookback through a grid-aligned buffer, and jump maps
// applied at switching instants.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "oswitch/control.hpp"
#include "oswitch/grid.hpp"
#include "oswitch/rng.hpp"
#include "oswitch/stats.hpp"

namespace oswitch {

/// Mode in force now and at the delayed time t - delay.
struct ModeView {
    ModeIndex current = 0;
    ModeIndex delayed = 0;
};

using DriftFn = std::function<void(double t, std::span<const double> x, std::span<const double> y,
                                   ModeView mode, std::span<double> out)>;
/// Writes a row-major dim x brownian_dim matrix.
using DiffusionFn = DriftFn;
using JumpCoeffFn =
    std::function<void(double t, std::span<const double> x, std::span<const double> y,
                       std::span<const double> mark, ModeView mode, std::span<double> out)>;
using JumpMapFn = std::function<void(ModeIndex from, ModeIndex to, double t,
                                     std::span<const double> x, std::span<double> out)>;
using SegmentFn = std::function<void(double s, std::span<double> out)>;

struct Mark {
    std::vector<double> value;
    double weight = 1.0;
};

/// State resets h_{b,b'}(t, x) applied at switching times, with the declared
/// constants used by the validators: |h(t,x)| <= bound v |x| and the
/// cycle-reduction length.
struct JumpMapFamily {
    JumpMapFn map;
    double bound = 0.0;
    double time_lipschitz = 0.0;
    std::size_t cycle_bound = 2;
    bool identity = true;

    static JumpMapFamily identity_maps() {
        JumpMapFamily f;
        f.map = [](ModeIndex, ModeIndex, double, std::span<const double> x, std::span<double> out) {
            std::copy(x.begin(), x.end(), out.begin());
        };
        return f;
    }

    void apply(ModeIndex from, ModeIndex to, double t, std::span<const double> x,
               std::span<double> out) const {
        map(from, to, t, x, out);
    }
};

/// Mode-indexed coefficients of the controlled SDDE.
struct SddeSpec {
    std::size_t dim = 1;
    std::size_t brownian_dim = 1;
    DriftFn drift;
    DiffusionFn diffusion;
    JumpCoeffFn jump_coeff;
    double delay = 0.0;
    SegmentFn initial_segment;
    double jump_intensity = 0.0;
    std::vector<Mark> marks;
    JumpMapFamily jump_maps = JumpMapFamily::identity_maps();

    /// Constant initial segment chi(s) = x0 on [-delay, 0].
    static SegmentFn constant_segment(std::vector<double> x0) {
        return [x0 = std::move(x0)](double, std::span<double> out) {
            std::copy(x0.begin(), x0.end(), out.begin());
        };
    }

    void validate() const {
        if (dim == 0) throw std::invalid_argument("SddeSpec: dim must be positive");
        if (!drift) throw std::invalid_argument("SddeSpec: drift missing");
        if (brownian_dim > 0 && !diffusion) throw std::invalid_argument("SddeSpec: diffusion missing");
        if (!initial_segment) throw std::invalid_argument("SddeSpec: initial segment missing");
        if (!(delay >= 0.0) || !std::isfinite(delay)) throw std::invalid_argument("SddeSpec: delay must be nonnegative");
        if (!(jump_intensity >= 0.0) || !std::isfinite(jump_intensity)) {
            throw std::invalid_argument("SddeSpec: jump intensity must be nonnegative");
        }
        if (!jump_maps.map) throw std::invalid_argument("SddeSpec: jump maps missing");
        if (jump_intensity > 0.0) {
            if (!jump_coeff) throw std::invalid_argument("SddeSpec: jump coefficient missing");
            if (marks.empty()) throw std::invalid_argument("SddeSpec: mark distribution empty");
        }
        if (!marks.empty()) {
            double total = 0.0;
            for (const auto& m : marks) {
                if (!(m.weight >= 0.0)) throw std::invalid_argument("SddeSpec: negative mark weight");
                total += m.weight;
            }
            if (std::abs(total - 1.0) > 1e-12) {
                throw std::invalid_argument("SddeSpec: mark weights must sum to 1");
            }
        }
    }
};

/// Distribution of the per-step Brownian increment.
enum class BrownianLaw {
    gaussian,     ///< Normal(0, dt I)
    two_point,    ///< +-sqrt(dt) with probability 1/2 each
    three_point,  ///< Gauss-Hermite: {-sqrt(3dt), 0, +sqrt(3dt)} w.p. {1/6, 2/3, 1/6}
};

/// Per-step jump law.
enum class JumpLaw {
    poisson,    ///< count ~ Poisson(lambda dt), i.i.d. marks
    bernoulli,  ///< at most one jump w.p. lambda dt, Brownian increment zeroed on that step
};

struct NoiseModel {
    BrownianLaw brownian = BrownianLaw::gaussian;
    JumpLaw jumps = JumpLaw::poisson;
};

/// All randomness for one path. Jump marks are stored in CSR form:
/// the marks of step i are jump_marks[jump_offsets[i] .. jump_offsets[i+1]).
struct NoiseDraw {
    std::size_t n_steps = 0;
    std::size_t brownian_dim = 0;
    std::vector<double> increments;
    std::vector<std::uint32_t> jump_offsets;
    std::vector<std::uint32_t> jump_marks;
    std::uint64_t seed = 0;

    [[nodiscard]] std::span<const double> dw(std::size_t i) const {
        return {increments.data() + i * brownian_dim, brownian_dim};
    }
    [[nodiscard]] std::span<const std::uint32_t> jumps(std::size_t i) const {
        return {jump_marks.data() + jump_offsets[i], jump_offsets[i + 1] - jump_offsets[i]};
    }
    [[nodiscard]] std::size_t jump_count() const noexcept { return jump_marks.size(); }

    /// Zero increments and no jumps.
    static NoiseDraw zero(std::size_t n_steps, std::size_t brownian_dim) {
        NoiseDraw d;
        d.n_steps = n_steps;
        d.brownian_dim = brownian_dim;
        d.increments.assign(n_steps * brownian_dim, 0.0);
        d.jump_offsets.assign(n_steps + 1, 0);
        return d;
    }
};

/// Draws the path noise; a pure function of (seed, grid, dims, law).
inline NoiseDraw sample_noise(const SddeSpec& spec, const TimeGrid& grid, std::uint64_t seed,
                              NoiseModel model = {}) {
    const std::size_t n = grid.n_steps();
    const double dt = grid.dt();
    const double sqdt = std::sqrt(dt);
    NoiseDraw d;
    d.n_steps = n;
    d.brownian_dim = spec.brownian_dim;
    d.seed = seed;
    d.increments.resize(n * spec.brownian_dim);
    d.jump_offsets.resize(n + 1, 0);

    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double rate = spec.jump_intensity * dt;
    if (rate > 1.0 && model.jumps == JumpLaw::bernoulli) {
        throw std::invalid_argument("sample_noise: lambda*dt exceeds 1 under the Bernoulli jump law");
    }
    std::poisson_distribution<int> poisson(rate > 0.0 ? rate : 1.0);
    std::vector<double> weights;
    for (const auto& m : spec.marks) weights.push_back(m.weight);
    std::discrete_distribution<std::uint32_t> pick_mark(weights.begin(), weights.end());

    for (std::size_t i = 0; i < n; ++i) {
        int count = 0;
        if (rate > 0.0) {
            if (model.jumps == JumpLaw::poisson) {
                count = poisson(gen);
            } else {
                count = unif(gen) < rate ? 1 : 0;
            }
        }
        for (int c = 0; c < count; ++c) d.jump_marks.push_back(pick_mark(gen));
        d.jump_offsets[i + 1] = static_cast<std::uint32_t>(d.jump_marks.size());

        const bool zero_dw = model.jumps == JumpLaw::bernoulli && count > 0;
        for (std::size_t k = 0; k < spec.brownian_dim; ++k) {
            double z = 0.0;
            switch (model.brownian) {
                case BrownianLaw::gaussian:
                    z = normal(gen) * sqdt;
                    break;
                case BrownianLaw::two_point:
                    z = unif(gen) < 0.5 ? -sqdt : sqdt;
                    break;
                case BrownianLaw::three_point: {
                    const double u = unif(gen);
                    const double a = std::sqrt(3.0 * dt);
                    z = u < 1.0 / 6.0 ? -a : (u < 5.0 / 6.0 ? 0.0 : a);
                    break;
                }
            }
            d.increments[i * spec.brownian_dim + k] = zero_dw ? 0.0 : z;
        }
    }
    return d;
}

/// Raised when a state component becomes non-finite or exceeds the divergence guard.
class SimulationDiverged : public std::runtime_error {
public:
    explicit SimulationDiverged(std::size_t step)
        : std::runtime_error("simulation diverged at step " + std::to_string(step)), step_(step) {}
    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

inline constexpr double kDivergenceBound = 1e12;

/// A switch as it was applied on a path.
struct SwitchEvent {
    std::size_t step = 0;
    ModeIndex from = 0;
    ModeIndex to = 0;
    std::vector<double> before;

    friend bool operator==(const SwitchEvent&, const SwitchEvent&) = default;
};

/// Simulated trajectory. States are stored on the grid from t_{-lag} to t_n
/// (post-switch values, i.e. right-continuous); modes[i] is the mode in force
/// on [t_i, t_{i+1}) and modes[n] the mode at T after any terminal switch.
class Path {
public:
    Path() = default;
    Path(std::size_t dim, std::size_t lag, std::size_t n_steps, ModeIndex initial_mode)
        : dim_(dim), lag_(lag), n_steps_(n_steps), initial_mode_(initial_mode),
          states_((lag + n_steps + 1) * dim, 0.0), modes_(n_steps + 1, initial_mode) {}

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::size_t lag() const noexcept { return lag_; }
    [[nodiscard]] std::size_t n_steps() const noexcept { return n_steps_; }
    [[nodiscard]] ModeIndex initial_mode() const noexcept { return initial_mode_; }

    /// State at grid index i, for -lag <= i <= n.
    [[nodiscard]] std::span<const double> state(std::ptrdiff_t i) const {
        return {states_.data() + offset(i), dim_};
    }
    [[nodiscard]] std::span<double> state(std::ptrdiff_t i) { return {states_.data() + offset(i), dim_}; }

    /// State at t_i - delay.
    [[nodiscard]] std::span<const double> delayed_state(std::size_t i) const {
        return state(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(lag_));
    }

    /// Mode in force at grid index i (the initial mode before t = 0).
    [[nodiscard]] ModeIndex mode(std::ptrdiff_t i) const {
        return i < 0 ? initial_mode_ : modes_.at(static_cast<std::size_t>(i));
    }
    void set_mode(std::size_t i, ModeIndex b) { modes_.at(i) = b; }

    [[nodiscard]] ModeView mode_view(std::size_t i) const {
        return {mode(static_cast<std::ptrdiff_t>(i)),
                mode(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(lag_))};
    }

    [[nodiscard]] const std::vector<SwitchEvent>& events() const noexcept { return events_; }
    void record(SwitchEvent e) { events_.push_back(std::move(e)); }

    /// The control that was applied, as grid times.
    [[nodiscard]] SwitchingControl control(const TimeGrid& grid) const {
        SwitchingControl u;
        for (const auto& e : events_) u.switches.push_back({grid.time(e.step), e.to});
        return u;
    }

    friend bool operator==(const Path&, const Path&) = default;

private:
    [[nodiscard]] std::size_t offset(std::ptrdiff_t i) const {
        const auto k = i + static_cast<std::ptrdiff_t>(lag_);
        if (k < 0 || k > static_cast<std::ptrdiff_t>(lag_ + n_steps_)) {
            throw std::out_of_range("Path: grid index out of range");
        }
        return static_cast<std::size_t>(k) * dim_;
    }

    std::size_t dim_ = 0;
    std::size_t lag_ = 0;
    std::size_t n_steps_ = 0;
    ModeIndex initial_mode_ = 0;
    std::vector<double> states_;
    std::vector<ModeIndex> modes_;
    std::vector<SwitchEvent> events_;
};

/// Scratch buffers for euler_step, sized once per thread.
struct StepWorkspace {
    std::vector<double> drift, diffusion, jump, comp;

    explicit StepWorkspace(const SddeSpec& spec)
        : drift(spec.dim), diffusion(spec.dim * spec.brownian_dim), jump(spec.dim), comp(spec.dim) {}
};

[[nodiscard]] inline bool state_diverged(std::span<const double> x) noexcept {
    double ss = 0.0;
    for (double v : x) {
        if (!std::isfinite(v)) return true;
        ss += v * v;
    }
    return !(std::sqrt(ss) <= kDivergenceBound);
}

/// One Euler step from t_i:
///   out = x + a dt + sigma dW + sum_jumps gamma(z) - dt lambda sum_l w_l gamma(z_l).
inline void euler_step(const SddeSpec& spec, double t, double dt, std::span<const double> x,
                       std::span<const double> y, ModeView mode, std::span<const double> dw,
                       std::span<const std::uint32_t> jumps, std::span<double> out,
                       StepWorkspace& ws) {
    const std::size_t d = spec.dim;
    spec.drift(t, x, y, mode, ws.drift);
    for (std::size_t r = 0; r < d; ++r) out[r] = x[r] + ws.drift[r] * dt;
    if (spec.brownian_dim > 0) {
        spec.diffusion(t, x, y, mode, ws.diffusion);
        for (std::size_t r = 0; r < d; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < spec.brownian_dim; ++c) {
                acc += ws.diffusion[r * spec.brownian_dim + c] * dw[c];
            }
            out[r] += acc;
        }
    }
    if (spec.jump_intensity > 0.0) {
        std::fill(ws.comp.begin(), ws.comp.end(), 0.0);
        for (const auto& m : spec.marks) {
            spec.jump_coeff(t, x, y, m.value, mode, ws.jump);
            for (std::size_t r = 0; r < d; ++r) ws.comp[r] += m.weight * ws.jump[r];
        }
        for (std::size_t r = 0; r < d; ++r) out[r] -= dt * spec.jump_intensity * ws.comp[r];
        for (auto idx : jumps) {
            spec.jump_coeff(t, x, y, spec.marks[idx].value, mode, ws.jump);
            for (std::size_t r = 0; r < d; ++r) out[r] += ws.jump[r];
        }
    }
}

/// Simulates a path whose switches are chosen online. At every grid index
/// i = 0..n, `decide(i, path, current_mode, targets)` may append target modes;
/// they are applied in order as composed jump maps before the step from t_i.
template <class Decider>
Path simulate_with(const SddeSpec& spec, const TimeGrid& grid, ModeIndex initial_mode,
                   const NoiseDraw& noise, Decider&& decide) {
    const std::size_t n = grid.n_steps();
    const std::size_t lag = grid.steps_for(spec.delay);
    if (noise.n_steps != n || noise.brownian_dim != spec.brownian_dim) {
        throw std::invalid_argument("simulate: noise draw does not match the grid");
    }
    Path path(spec.dim, lag, n, initial_mode);
    for (std::size_t j = 0; j <= lag; ++j) {
        const auto i = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(lag);
        spec.initial_segment(static_cast<double>(i) * grid.dt(), path.state(i));
    }
    StepWorkspace ws(spec);
    std::vector<ModeIndex> targets;
    std::vector<double> buf(spec.dim);
    ModeIndex current = initial_mode;
    for (std::size_t i = 0;; ++i) {
        targets.clear();
        path.set_mode(i, current);
        decide(i, std::as_const(path), current, targets);
        const auto ii = static_cast<std::ptrdiff_t>(i);
        for (ModeIndex to : targets) {
            if (to == current) {
                throw std::invalid_argument("simulate: switch target equals the current mode");
            }
            auto x = path.state(ii);
            SwitchEvent e{i, current, to, std::vector<double>(x.begin(), x.end())};
            spec.jump_maps.apply(current, to, grid.time(i), e.before, buf);
            std::copy(buf.begin(), buf.end(), x.begin());
            if (state_diverged(x)) throw SimulationDiverged(i);
            current = to;
            path.record(std::move(e));
        }
        path.set_mode(i, current);
        if (i == n) break;
        const auto x = path.state(ii);
        const auto y = path.delayed_state(i);
        euler_step(spec, grid.time(i), grid.dt(), x, y, path.mode_view(i), noise.dw(i),
                   noise.jumps(i), path.state(ii + 1), ws);
        if (state_diverged(path.state(ii + 1))) throw SimulationDiverged(i + 1);
    }
    return path;
}

/// Grid indices of the switch times; throws if a time is off the grid.
inline std::vector<std::size_t> control_steps(const SwitchingControl& u, const TimeGrid& grid) {
    std::vector<std::size_t> steps;
    for (const auto& s : u.switches) {
        auto k = grid.index_of(s.time);
        if (!k) throw std::invalid_argument("switch time is not on the grid");
        steps.push_back(*k);
    }
    return steps;
}

/// Simulates a path under a fixed control. Switch times must lie on the grid.
inline Path simulate_path(const SddeSpec& spec, const TimeGrid& grid, ModeIndex initial_mode,
                          const SwitchingControl& control, const NoiseDraw& noise) {
    const auto steps = control_steps(control, grid);
    for (std::size_t j = 1; j < steps.size(); ++j) {
        if (steps[j] < steps[j - 1]) throw std::invalid_argument("switch times not nondecreasing");
    }
    std::size_t next = 0;
    return simulate_with(spec, grid, initial_mode, noise,
                         [&](std::size_t i, const Path&, ModeIndex, std::vector<ModeIndex>& out) {
                             while (next < steps.size() && steps[next] == i) {
                                 out.push_back(control.switches[next].target);
                                 ++next;
                             }
                         });
}

/// E[sup_{t in [0,T]} |X_t|^p] by Monte Carlo over n_paths independent paths.
inline McEstimate estimate_moment(const SddeSpec& spec, const TimeGrid& grid, ModeIndex initial_mode,
                                  const SwitchingControl& control, double p, std::size_t n_paths,
                                  std::uint64_t seed, NoiseModel model = {}, std::size_t workers = 1) {
    if (!(p > 0.0)) throw std::invalid_argument("estimate_moment: p must be positive");
    if (n_paths < 2) throw std::invalid_argument("estimate_moment: need at least two paths");
    std::vector<double> samples(n_paths);
    parallel_for(n_paths, workers, [&](std::size_t s) {
        const auto noise = sample_noise(spec, grid, derive_seed(seed, streams::noise, s), model);
        const auto path = simulate_path(spec, grid, initial_mode, control, noise);
        double best = 0.0;
        for (std::size_t i = 0; i <= grid.n_steps(); ++i) {
            double ss = 0.0;
            for (double v : path.state(static_cast<std::ptrdiff_t>(i))) ss += v * v;
            best = std::max(best, std::pow(std::sqrt(ss), p));
        }
        samples[s] = best;
    });
    return summarize(samples);
}

}  // namespace oswitch
