#pragma once

// JSON encodings of scenario trees, oracle instances and results, solver
// diagnostics and validation reports.

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

#include "oswitch/controls.hpp"
#include "oswitch/oracle.hpp"
#include "oswitch/snell.hpp"
#include "oswitch/solver.hpp"

namespace oswitch::io {

using nlohmann::json;

inline json to_json(const ScenarioTree& tree) {
    json nodes = json::array();
    for (const auto& n : tree.nodes()) {
        nodes.push_back({{"parent", n.parent == ScenarioTree::npos ? json(nullptr) : json(n.parent)},
                         {"prob", n.prob},
                         {"state", n.state}});
    }
    return {{"nodes", nodes}};
}

/// Inverse of to_json(ScenarioTree); validates the probabilities.
inline ScenarioTree tree_from_json(const json& j) {
    ScenarioTree tree;
    const auto& nodes = j.at("nodes");
    if (!nodes.is_array() || nodes.empty()) throw std::invalid_argument("tree: nodes must be a nonempty array");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        auto state = n.at("state").get<std::vector<double>>();
        if (i == 0) {
            if (!n.at("parent").is_null()) throw std::invalid_argument("tree: node 0 must be the root");
            tree.add_root(std::move(state));
            continue;
        }
        const auto parent = n.at("parent").get<std::size_t>();
        if (parent >= i) throw std::invalid_argument("tree: parent must precede child");
        tree.add_child(parent, n.at("prob").get<double>(), std::move(state));
    }
    tree.validate();
    return tree;
}

inline json to_json(const OracleInstance& inst) {
    json marks = json::array();
    for (int m : inst.jump_mark) marks.push_back(m);
    return {{"problem", inst.problem->name},
            {"horizon", inst.grid.horizon()},
            {"steps", inst.grid.n_steps()},
            {"branching", inst.branching},
            {"jumps", inst.jumps},
            {"tree", to_json(inst.tree)},
            {"increments", inst.increments},
            {"jump_mark", marks}};
}

inline json to_json(const DpResult& r) {
    return {{"k_max", r.k_max}, {"root", r.root}};
}

inline json to_json(const EnumerationResult& r) {
    json control = json::array();
    for (const auto& d : r.control) control.push_back({{"node", d.node}, {"switches", d.switches}});
    return {{"value", r.value}, {"control", control}, {"controls_enumerated", r.controls_enumerated}};
}

inline json to_json(const PicardRecord& r) {
    return {{"k", r.k},
            {"y0", r.y0},
            {"y0_se", r.y0_se},
            {"max_gap", r.max_gap},
            {"min_gap", r.min_gap},
            {"monotone_violations", r.monotone_violations},
            {"probes", r.probes},
            {"mean_residual", r.mean_residual},
            {"ridge_fits", r.ridge_fits},
            {"fits", r.fits}};
}

inline json to_json(const Certificate& c) {
    return {{"lower_bound", c.lower_bound.mean},
            {"lower_bound_se", c.lower_bound.se},
            {"paths", c.lower_bound.n},
            {"y0", c.y0},
            {"y0_se", c.y0_se},
            {"gap", c.gap},
            {"gap_se", c.gap_se},
            {"switch_histogram", c.switch_histogram},
            {"max_switches", c.max_switches},
            {"terminal_switches", c.terminal_switches},
            {"terminal_evaluations", c.terminal_evaluations},
            {"gross_min", c.gross_min},
            {"gross_max", c.gross_max}};
}

/// Per-k diagnostics of a solved surface.
inline json diagnostics(const ValueSurface& s) {
    json picard = json::array();
    for (const auto& r : s.history()) picard.push_back(to_json(r));
    return {{"y0", s.y0()},
            {"y0_se", s.y0_se()},
            {"k_top", s.k_top()},
            {"converged", s.converged()},
            {"features", s.features().size()},
            {"picard", picard},
            {"warnings", s.warnings()}};
}

struct CheckResult {
    std::string name;
    bool ok = true;
    json witness;  ///< null when ok
};

struct ValidationReport {
    std::string problem;
    std::vector<CheckResult> checks;

    [[nodiscard]] bool ok() const {
        for (const auto& c : checks)
            if (!c.ok) return false;
        return true;
    }
};

inline json to_json(const ValidationReport& r) {
    json checks = json::array();
    for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"ok", c.ok}, {"witness", c.witness}});
    return {{"problem", r.problem}, {"ok", r.ok()}, {"checks", checks}};
}

/// Runs every standing-assumption validator on the problem's probe set and
/// the grid times.
inline ValidationReport validate_problem(const SwitchingProblem& p, const TimeGrid& grid) {
    ValidationReport r;
    r.problem = p.name;
    std::vector<double> times;
    for (std::size_t i = 0; i <= grid.n_steps(); ++i) times.push_back(grid.time(i));

    CheckResult sign{"cost_sign", true, nullptr};
    if (auto w = validate_cost_sign(p.costs, p.modes, times)) {
        sign.ok = false;
        sign.witness = *w;
    }
    r.checks.push_back(sign);

    CheckResult loop{"no_free_loop", true, nullptr};
    const auto lr = minimum_loop_cost(p.costs, p.modes, times);
    if (!lr.ok()) {
        loop.ok = false;
        loop.witness = {{"cycle", lr.cycle}, {"times", lr.times}, {"sum", lr.min_sum}, {"floor", lr.floor}};
    }
    r.checks.push_back(loop);

    CheckResult terminal{"terminal_no_switch", true, nullptr};
    if (auto w = validate_terminal_no_switch(p, grid.horizon(), p.probes)) {
        terminal.ok = false;
        terminal.witness = {{"state", w->state}, {"from", w->from}, {"to", w->to}, {"stay", w->stay},
                            {"switch_value", w->switch_value}};
    }
    r.checks.push_back(terminal);

    CheckResult cycle{"cycle_reduction", true, nullptr};
    if (p.modes.count <= 5) {
        const std::vector<double> sample_times{0.0, 0.5 * grid.horizon(), grid.horizon()};
        if (auto w = validate_cycle_reduction(p.dynamics.jump_maps, p.modes, p.probes, sample_times,
                                              p.dynamics.jump_maps.cycle_bound)) {
            cycle.ok = false;
            cycle.witness = {{"chain", w->chain}};
        }
    } else {
        cycle.witness = "skipped: more than 5 modes";
    }
    r.checks.push_back(cycle);

    CheckResult jump{"jump_bound", true, nullptr};
    if (auto w = validate_jump_bound(p.dynamics.jump_maps, p.modes, times, p.probes)) {
        jump.ok = false;
        jump.witness = {{"state", w->state}, {"from", w->from}, {"to", w->to}, {"norm_after", w->norm_after}};
    }
    r.checks.push_back(jump);

    CheckResult growth{"growth", true, nullptr};
    if (auto w = validate_growth(p, times, p.probes)) {
        growth.ok = false;
        growth.witness = {{"state", w->state}, {"time", w->time}, {"mode", w->mode}, {"value", w->value},
                          {"bound", w->bound}};
    }
    r.checks.push_back(growth);
    return r;
}

}  // namespace oswitch::io
