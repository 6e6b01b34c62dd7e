#pragma once

// Exact ground truth on small scenario trees: budgeted dynamic programming
// over (node, mode, remaining switches) and brute-force enumeration of all
// adapted controls.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "oswitch/controls.hpp"
#include "oswitch/sdde.hpp"
#include "oswitch/snell.hpp"

namespace oswitch {

/// A scenario tree whose edges carry quantized noise. Node states are the
/// reference trajectory with the initial mode frozen; controlled states are
/// recomputed by the oracle from the edge noise.
struct OracleInstance {
    std::shared_ptr<const SwitchingProblem> problem;
    TimeGrid grid{1.0, 1};
    std::size_t branching = 2;
    bool jumps = false;
    ScenarioTree tree;
    /// Brownian increment on the edge into each node (empty for the root).
    std::vector<std::vector<double>> increments;
    /// Mark index of the jump on the edge into each node, or -1.
    std::vector<int> jump_mark;

    /// Noise law under which path simulation matches the tree.
    [[nodiscard]] NoiseModel noise_model() const {
        NoiseModel m;
        m.brownian = branching == 3 ? BrownianLaw::three_point : BrownianLaw::two_point;
        m.jumps = JumpLaw::bernoulli;
        return m;
    }
};

inline constexpr std::size_t kMaxLatticeNodes = 100000;
inline constexpr double kMaxEnumeratedControls = 1e7;

/// Builds the noise tree: per Brownian component, +-sqrt(dt) (branching 2),
/// the three-point Gauss-Hermite rule (branching 3) or no noise (branching 1).
/// With `jumps`, one extra branch per mark carries a jump with probability
/// lambda dt w_l and no Brownian increment.
inline OracleInstance build_lattice(std::shared_ptr<const SwitchingProblem> problem, const TimeGrid& grid,
                                    std::size_t branching, bool jumps = false,
                                    std::size_t max_nodes = kMaxLatticeNodes) {
    const auto& spec = problem->dynamics;
    spec.validate();
    if (branching < 1 || branching > 3) throw std::invalid_argument("build_lattice: branching must be 1, 2 or 3");
    const std::size_t lag = grid.steps_for(spec.delay);
    if (spec.delay > grid.horizon()) throw std::invalid_argument("build_lattice: delay exceeds the horizon");
    const double dt = grid.dt();
    const std::size_t nb = spec.brownian_dim;

    struct Branch {
        std::vector<double> dw;
        int mark = -1;
        double prob = 1.0;
    };
    std::vector<double> pts, wts;
    if (branching == 1) {
        pts = {0.0};
        wts = {1.0};
    } else if (branching == 2) {
        pts = {-std::sqrt(dt), std::sqrt(dt)};
        wts = {0.5, 0.5};
    } else {
        pts = {-std::sqrt(3.0 * dt), 0.0, std::sqrt(3.0 * dt)};
        wts = {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0};
    }
    std::vector<Branch> branches{{std::vector<double>(), -1, 1.0}};
    for (std::size_t c = 0; c < nb; ++c) {
        std::vector<Branch> next;
        for (const auto& b : branches)
            for (std::size_t j = 0; j < pts.size(); ++j) {
                auto dw = b.dw;
                dw.push_back(pts[j]);
                next.push_back({std::move(dw), -1, b.prob * wts[j]});
            }
        branches = std::move(next);
    }
    const bool with_jumps = jumps && spec.jump_intensity > 0.0;
    if (with_jumps) {
        const double rate = spec.jump_intensity * dt;
        if (rate > 1.0) throw std::invalid_argument("build_lattice: lambda*dt exceeds 1");
        for (auto& b : branches) b.prob *= 1.0 - rate;
        for (std::size_t l = 0; l < spec.marks.size(); ++l) {
            branches.push_back({std::vector<double>(nb, 0.0), static_cast<int>(l), rate * spec.marks[l].weight});
        }
    }

    const std::size_t n = grid.n_steps();
    double count = 1.0, level = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        level *= static_cast<double>(branches.size());
        count += level;
    }
    if (count > static_cast<double>(max_nodes)) {
        throw std::length_error("build_lattice: node budget exceeded (" + std::to_string(static_cast<long long>(count)) +
                                " > " + std::to_string(max_nodes) + ")");
    }

    OracleInstance inst;
    inst.problem = std::move(problem);
    inst.grid = grid;
    inst.branching = branching;
    inst.jumps = with_jumps;

    // Initial segment on t_{-lag} .. t_0.
    std::vector<std::vector<double>> segment(lag + 1, std::vector<double>(spec.dim));
    for (std::size_t j = 0; j <= lag; ++j) {
        spec.initial_segment((static_cast<double>(j) - static_cast<double>(lag)) * dt, segment[j]);
    }
    inst.tree.add_root(segment[lag]);
    inst.increments.emplace_back();
    inst.jump_mark.push_back(-1);

    const ModeIndex b0 = inst.problem->modes.initial;
    StepWorkspace ws(spec);
    std::vector<double> out(spec.dim);
    std::vector<std::uint32_t> jump_buf(1);
    // Parents are processed in creation order, so levels fill breadth first.
    for (std::size_t node = 0; node < inst.tree.size(); ++node) {
        const std::size_t lvl = inst.tree.node(node).level;
        if (lvl == n) continue;
        // Delayed reference state: ancestor `lag` levels up, or the initial segment.
        std::vector<double> y;
        if (lag == 0) {
            y = inst.tree.node(node).state;
        } else if (lvl >= lag) {
            std::size_t a = node;
            for (std::size_t s = 0; s < lag; ++s) a = inst.tree.node(a).parent;
            y = inst.tree.node(a).state;
        } else {
            y = segment[lvl];
        }
        const auto x = inst.tree.node(node).state;
        for (const auto& br : branches) {
            std::span<const std::uint32_t> jumps_here;
            if (br.mark >= 0) {
                jump_buf[0] = static_cast<std::uint32_t>(br.mark);
                jumps_here = jump_buf;
            }
            euler_step(spec, grid.time(lvl), dt, x, y, {b0, b0}, br.dw, jumps_here, out, ws);
            inst.tree.add_child(node, br.prob, out);
            inst.increments.push_back(br.dw);
            inst.jump_mark.push_back(br.mark);
        }
    }
    inst.tree.validate();
    return inst;
}

/// The last lag+1 states and modes of a controlled trajectory at one node,
/// oldest first; the final entries are the current state and mode.
struct OracleContext {
    std::vector<double> states;
    std::vector<ModeIndex> modes;

    [[nodiscard]] std::size_t window() const noexcept { return modes.size(); }
    [[nodiscard]] std::span<const double> current(std::size_t dim) const {
        return {states.data() + states.size() - dim, dim};
    }
    [[nodiscard]] std::span<double> current(std::size_t dim) {
        return {states.data() + states.size() - dim, dim};
    }
    [[nodiscard]] std::span<const double> delayed(std::size_t dim) const { return {states.data(), dim}; }
    [[nodiscard]] ModeIndex mode() const { return modes.back(); }
};

/// Exact backward induction on an oracle instance. Values are memoized on
/// (node, budget, context) so histories that differ only before the delay
/// window share work.
class OracleEvaluator {
public:
    explicit OracleEvaluator(const OracleInstance& inst)
        : inst_(inst), p_(*inst.problem), dim_(p_.dynamics.dim), lag_(inst.grid.steps_for(p_.dynamics.delay)),
          ws_(p_.dynamics), scratch_(dim_) {}

    [[nodiscard]] const OracleInstance& instance() const noexcept { return inst_; }
    [[nodiscard]] std::size_t lag() const noexcept { return lag_; }

    /// Context at the root in mode b, history in the initial mode.
    [[nodiscard]] OracleContext root_context(ModeIndex b) const {
        OracleContext c;
        const double dt = inst_.grid.dt();
        c.states.resize((lag_ + 1) * dim_);
        for (std::size_t j = 0; j <= lag_; ++j) {
            p_.dynamics.initial_segment((static_cast<double>(j) - static_cast<double>(lag_)) * dt,
                                        std::span<double>(c.states.data() + j * dim_, dim_));
        }
        c.modes.assign(lag_ + 1, p_.modes.initial);
        c.modes.back() = b;
        return c;
    }

    /// Context at the child after one step from `ctx` at `node`.
    [[nodiscard]] OracleContext step(const OracleContext& ctx, std::size_t node, std::size_t child) {
        const std::size_t lvl = inst_.tree.node(node).level;
        std::span<const std::uint32_t> jumps;
        if (inst_.jump_mark[child] >= 0) {
            jump_ = static_cast<std::uint32_t>(inst_.jump_mark[child]);
            jumps = std::span<const std::uint32_t>(&jump_, 1);
        }
        const auto x = ctx.current(dim_);
        const auto y = ctx.delayed(dim_);
        euler_step(p_.dynamics, inst_.grid.time(lvl), inst_.grid.dt(), x, y, {ctx.mode(), ctx.modes.front()},
                   inst_.increments[child], jumps, scratch_, ws_);
        OracleContext next;
        next.states.reserve(ctx.states.size());
        next.states.assign(ctx.states.begin() + static_cast<std::ptrdiff_t>(dim_), ctx.states.end());
        next.states.insert(next.states.end(), scratch_.begin(), scratch_.end());
        next.modes.assign(ctx.modes.begin() + 1, ctx.modes.end());
        next.modes.push_back(ctx.mode());
        return next;
    }

    /// Context after switching into `to` at `node`.
    [[nodiscard]] OracleContext switch_to(const OracleContext& ctx, std::size_t node, ModeIndex to) const {
        OracleContext c = ctx;
        const double t = inst_.grid.time(inst_.tree.node(node).level);
        std::vector<double> hx(dim_);
        p_.dynamics.jump_maps.apply(ctx.mode(), to, t, ctx.current(dim_), hx);
        std::copy(hx.begin(), hx.end(), c.current(dim_).begin());
        c.modes.back() = to;
        return c;
    }

    [[nodiscard]] double switch_cost(const OracleContext& ctx, std::size_t node, ModeIndex to) const {
        return p_.costs(ctx.mode(), to, inst_.grid.time(inst_.tree.node(node).level));
    }

    /// Running reward f dt collected on the step leaving `node`.
    [[nodiscard]] double running(const OracleContext& ctx, std::size_t node) const {
        const double t = inst_.grid.time(inst_.tree.node(node).level);
        return p_.reward.running(t, ctx.current(dim_), ctx.mode()) * inst_.grid.dt();
    }

    [[nodiscard]] double terminal(const OracleContext& ctx) const { return p_.reward.terminal(ctx.current(dim_)); }

    /// Y^k at `node` in the context's mode with at most k further switches.
    double value(std::size_t node, std::size_t k, const OracleContext& ctx) {
        if (inst_.tree.is_leaf(node)) return terminal(ctx);
        const auto key = make_key(node, k, ctx);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        double best = continuation(node, k, ctx);
        if (k > 0) {
            for (ModeIndex to = 0; to < p_.modes.count; ++to) {
                if (to == ctx.mode()) continue;
                const double v = -switch_cost(ctx, node, to) + value(node, k - 1, switch_to(ctx, node, to));
                best = std::max(best, v);
            }
        }
        memo_.emplace(key, best);
        return best;
    }

    /// f dt + E[Y^k(child)] without switching at `node`.
    double continuation(std::size_t node, std::size_t k, const OracleContext& ctx) {
        double e = 0.0;
        for (auto c : inst_.tree.node(node).children) {
            e += inst_.tree.node(c).prob * value(c, k, step(ctx, node, c));
        }
        return running(ctx, node) + e;
    }

    [[nodiscard]] std::size_t memo_size() const noexcept { return memo_.size(); }

private:
    [[nodiscard]] std::string make_key(std::size_t node, std::size_t k, const OracleContext& ctx) const {
        std::string key(sizeof(std::size_t) * 2 + ctx.states.size() * sizeof(double) +
                            ctx.modes.size() * sizeof(ModeIndex),
                        '\0');
        char* w = key.data();
        std::memcpy(w, &node, sizeof node);
        w += sizeof node;
        std::memcpy(w, &k, sizeof k);
        w += sizeof k;
        std::memcpy(w, ctx.states.data(), ctx.states.size() * sizeof(double));
        w += ctx.states.size() * sizeof(double);
        std::memcpy(w, ctx.modes.data(), ctx.modes.size() * sizeof(ModeIndex));
        return key;
    }

    const OracleInstance& inst_;
    const SwitchingProblem& p_;
    std::size_t dim_;
    std::size_t lag_;
    StepWorkspace ws_;
    std::vector<double> scratch_;
    std::uint32_t jump_ = 0;
    std::unordered_map<std::string, double> memo_;
};

struct DpResult {
    std::size_t k_max = 0;
    /// root[k][b]: Y^k at the root, starting in mode b without paying a switch.
    std::vector<std::vector<double>> root;
    /// nodes[k][node][b]: Y^k at each node along the trajectory frozen in mode b from the root.
    std::vector<std::vector<std::vector<double>>> nodes;

    [[nodiscard]] double root_value(std::size_t k, ModeIndex b) const { return root.at(k).at(b); }
    [[nodiscard]] double node_value(std::size_t k, std::size_t node, ModeIndex b) const {
        return nodes.at(k).at(node).at(b);
    }
};

/// Contexts of the trajectory that stays in mode b from the root, per node.
inline std::vector<OracleContext> frozen_contexts(OracleEvaluator& ev, ModeIndex b) {
    const auto& tree = ev.instance().tree;
    std::vector<OracleContext> ctx(tree.size());
    ctx[0] = ev.root_context(b);
    for (std::size_t i = 0; i < tree.size(); ++i)
        for (auto c : tree.node(i).children) ctx[c] = ev.step(ctx[i], i, c);
    return ctx;
}

inline DpResult exact_dp(const OracleInstance& inst, std::size_t k_max) {
    OracleEvaluator ev(inst);
    const std::size_t m = inst.problem->modes.count;
    DpResult r;
    r.k_max = k_max;
    r.root.assign(k_max + 1, std::vector<double>(m));
    r.nodes.assign(k_max + 1, std::vector<std::vector<double>>(inst.tree.size(), std::vector<double>(m)));
    for (ModeIndex b = 0; b < m; ++b) {
        const auto ctx = frozen_contexts(ev, b);
        for (std::size_t k = 0; k <= k_max; ++k)
            for (std::size_t node = 0; node < inst.tree.size(); ++node) r.nodes[k][node][b] = ev.value(node, k, ctx[node]);
    }
    for (std::size_t k = 0; k <= k_max; ++k)
        for (ModeIndex b = 0; b < m; ++b) r.root[k][b] = r.nodes[k][0][b];
    return r;
}

/// Decision at one information node: the switches applied there, in order.
struct NodeDecision {
    std::size_t node = 0;
    std::vector<ModeIndex> switches;
};

struct EnumerationResult {
    double value = -std::numeric_limits<double>::infinity();
    /// Decisions of the best control at every reached node with at least one switch.
    std::vector<NodeDecision> control;
    double controls_enumerated = 0.0;
};

/// Number of adapted controls for a tree with uniform branching from a node
/// at `level` with `budget` switches left.
inline double count_adapted_controls(std::size_t levels, std::size_t branching, std::size_t m, std::size_t budget) {
    // c[l][r]: controls of the subtree rooted at level l with r switches left.
    std::vector<std::vector<double>> c(levels + 1, std::vector<double>(budget + 1, 1.0));
    for (std::size_t l = levels; l-- > 0;)
        for (std::size_t r = 0; r <= budget; ++r) {
            double total = 0.0;
            for (std::size_t a = 0; a <= r; ++a) {
                total += std::pow(static_cast<double>(m - 1), static_cast<double>(a)) *
                         std::pow(c[l + 1][r - a], static_cast<double>(branching));
            }
            c[l][r] = total;
        }
    return c[0][budget];
}

/// Exhaustive maximization of J over all adapted controls with at most k_max
/// switches: at every node a finite switch sequence (each target differing
/// from the previous mode), no switches at the leaves.
inline EnumerationResult enumerate_controls(const OracleInstance& inst, std::size_t k_max,
                                            double max_controls = kMaxEnumeratedControls) {
    const auto& tree = inst.tree;
    const std::size_t m = inst.problem->modes.count;
    const std::size_t fanout = tree.node(0).children.size();
    const double total = count_adapted_controls(inst.grid.n_steps(), std::max<std::size_t>(fanout, 1), m, k_max);
    if (total > max_controls) {
        throw std::length_error("enumerate_controls: " + std::to_string(static_cast<long long>(total)) +
                                " controls exceed the enumeration budget");
    }
    OracleEvaluator ev(inst);

    struct Item {
        std::size_t node;
        OracleContext ctx;
        std::size_t budget;
        double reach;
    };
    EnumerationResult res;
    std::vector<Item> work;
    // Never reallocated, so references into it stay valid during recursion.
    work.reserve(tree.size());
    work.push_back({0, ev.root_context(inst.problem->modes.initial), k_max, 1.0});
    std::vector<NodeDecision> decisions;

    // Switch sequences of length <= r from mode b.
    std::function<void(ModeIndex, std::size_t, std::vector<ModeIndex>&, std::vector<std::vector<ModeIndex>>&)> seqs =
        [&](ModeIndex b, std::size_t r, std::vector<ModeIndex>& cur, std::vector<std::vector<ModeIndex>>& out) {
            out.push_back(cur);
            if (r == 0) return;
            for (ModeIndex to = 0; to < m; ++to) {
                if (to == b) continue;
                cur.push_back(to);
                seqs(to, r - 1, cur, out);
                cur.pop_back();
            }
        };

    // actions[b][r]: every switch sequence of length <= r from mode b.
    std::vector<std::vector<std::vector<std::vector<ModeIndex>>>> actions(m, std::vector<std::vector<std::vector<ModeIndex>>>(k_max + 1));
    for (ModeIndex b = 0; b < m; ++b)
        for (std::size_t r = 0; r <= k_max; ++r) {
            std::vector<ModeIndex> cur;
            seqs(b, r, cur, actions[b][r]);
        }

    std::function<void(std::size_t, double)> rec = [&](std::size_t pos, double acc) {
        if (pos == work.size()) {
            res.controls_enumerated += 1.0;
            if (acc > res.value) {
                res.value = acc;
                res.control = decisions;
            }
            return;
        }
        const Item& item = work[pos];
        if (tree.is_leaf(item.node)) {
            rec(pos + 1, acc + item.reach * ev.terminal(item.ctx));
            return;
        }
        for (const auto& a : actions[item.ctx.mode()][item.budget]) {
            OracleContext ctx = item.ctx;
            double gain = 0.0;
            for (ModeIndex to : a) {
                gain -= ev.switch_cost(ctx, item.node, to);
                ctx = ev.switch_to(ctx, item.node, to);
            }
            gain += ev.running(ctx, item.node);
            const std::size_t mark = work.size();
            for (auto c : tree.node(item.node).children) {
                auto next = ev.step(ctx, item.node, c);
                // Leaves carry no decision; collect their terminal reward now.
                if (tree.is_leaf(c)) {
                    gain += tree.node(c).prob * ev.terminal(next);
                    continue;
                }
                work.push_back({c, std::move(next), item.budget - a.size(), item.reach * tree.node(c).prob});
            }
            if (!a.empty()) decisions.push_back({item.node, a});
            rec(pos + 1, acc + item.reach * gain);
            if (!a.empty()) decisions.pop_back();
            work.resize(mark);
        }
    };
    rec(0, 0.0);
    return res;
}

/// Payoff and value processes of the frozen-b trajectory in cumulative form:
/// A(node) is the running reward collected before the node,
///   value(node)  = A + Y^K(node, b)
///   payoff(node) = A + max_{b' != b}(-c + Y^{K-1}(h(x), b'))   (internal nodes)
///   payoff(leaf) = A + g(x).
/// The value process is the Snell envelope of the payoff once Y^K = Y^{K-1}.
struct SnellConsistency {
    TreeProcess payoff;
    TreeProcess value;
    TreeProcess envelope;
    double max_deviation = 0.0;
};

inline SnellConsistency snell_consistency(const OracleInstance& inst, ModeIndex b, std::size_t k) {
    if (k == 0) throw std::invalid_argument("snell_consistency: need a positive budget");
    OracleEvaluator ev(inst);
    const auto& tree = inst.tree;
    const auto ctx = frozen_contexts(ev, b);
    SnellConsistency r;
    r.payoff.resize(tree.size());
    r.value.resize(tree.size());
    std::vector<double> acc(tree.size(), 0.0);
    for (std::size_t node = 0; node < tree.size(); ++node) {
        for (auto c : tree.node(node).children) acc[c] = acc[node] + ev.running(ctx[node], node);
        r.value[node] = acc[node] + ev.value(node, k, ctx[node]);
        if (tree.is_leaf(node)) {
            r.payoff[node] = acc[node] + ev.terminal(ctx[node]);
            continue;
        }
        double best = -std::numeric_limits<double>::infinity();
        for (ModeIndex to = 0; to < inst.problem->modes.count; ++to) {
            if (to == b) continue;
            best = std::max(best, -ev.switch_cost(ctx[node], node, to) + ev.value(node, k - 1, ev.switch_to(ctx[node], node, to)));
        }
        r.payoff[node] = acc[node] + best;
    }
    r.envelope = snell_envelope(tree, r.payoff);
    for (std::size_t node = 0; node < tree.size(); ++node) {
        r.max_deviation = std::max(r.max_deviation, std::abs(r.envelope[node] - r.value[node]));
    }
    return r;
}

}  // namespace oswitch
