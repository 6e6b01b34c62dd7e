#pragma once

// Run configuration: a JSON document selecting a built-in problem family,
// the time grid and the solver, oracle, simulation and output settings.
// Every key is checked; errors carry the JSON path of the offending field.

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "oswitch/affine.hpp"
#include "oswitch/hydro.hpp"
#include "oswitch/solver.hpp"

namespace oswitch::io {

using nlohmann::json;

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& message)
        : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
    [[nodiscard]] const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

namespace detail {

/// Typed access to one JSON object. `done()` rejects keys that were never read.
class Fields {
public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    }

    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }
    [[nodiscard]] std::string path(const std::string& key) const { return path_ + "." + key; }

    template <class T>
    T get(const std::string& key, T fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        return convert<T>(j_.at(key), path(key));
    }

    template <class T>
    T require(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError(path(key), "required field missing");
        return convert<T>(j_.at(key), path(key));
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    Fields sub(const std::string& key) {
        seen_.insert(key);
        static const json empty = json::object();
        return Fields(j_.contains(key) ? j_.at(key) : empty, path(key));
    }

    void done() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(path(it.key()), "unknown field");
    }

    template <class T>
    static T convert(const json& v, const std::string& where) {
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ConfigError(where, "expected a number");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError(where, "expected true or false");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0 && !v.is_number_unsigned())) {
                    throw ConfigError(where, "expected a nonnegative integer");
                }
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError(where, "expected a string");
            }
            return v.get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(where, std::string("wrong type (") + e.what() + ")");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline std::vector<double> vector_of(const json& v, std::size_t n, const std::string& where) {
    if (!v.is_array() || v.size() != n) throw ConfigError(where, "expected an array of length " + std::to_string(n));
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(Fields::convert<double>(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

inline std::vector<std::vector<double>> table_of(const json& v, std::size_t rows, std::size_t cols,
                                                 const std::string& where) {
    if (!v.is_array() || v.size() != rows) throw ConfigError(where, "expected " + std::to_string(rows) + " rows");
    std::vector<std::vector<double>> out;
    for (std::size_t r = 0; r < rows; ++r) out.push_back(vector_of(v[r], cols, where + "[" + std::to_string(r) + "]"));
    return out;
}

inline std::vector<Mark> marks_of(const json& v, std::size_t width, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where, "expected an array of {value, weight}");
    std::vector<Mark> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto here = where + "[" + std::to_string(i) + "]";
        Fields f(v[i], here);
        Mark m;
        const auto& val = f.raw("value");
        if (val.is_number()) {
            m.value = {val.get<double>()};
        } else if (width == 0 || val.size() == 1 || val.size() == width) {
            m.value = vector_of(val, val.size(), f.path("value"));
        } else {
            throw ConfigError(f.path("value"), "mark has the wrong number of components");
        }
        m.weight = f.require<double>("weight");
        f.done();
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace detail

struct GridConfig {
    double horizon = 1.0;
    std::size_t steps = 64;
};

struct SolverConfig {
    std::size_t k_max = 8;
    std::size_t n_paths = 10000;
    int degree = 2;
    bool cross_terms = true;
    double exploration = 0.1;
    std::size_t policy_rounds = 1;
    double picard_tol = 1e-3;
    std::size_t probes_per_step = 32;
    std::size_t max_switches_per_instant = 0;
};

struct CertifyConfig {
    std::size_t n_paths = 10000;
    std::optional<std::uint64_t> seed;  ///< defaults to a value derived from the run seed
};

struct OracleConfig {
    std::size_t branching = 2;
    bool jumps = false;
    std::size_t k_max = 4;
    bool enumerate = true;
    double rel_tol = 0.02;
    double se_mult = 3.0;
};

struct SimulateConfig {
    std::size_t n_paths = 1000;
    std::size_t export_paths = 3;
    SwitchingControl control;
};

struct WaterValueConfig {
    std::vector<double> levels{0.5, 0.75, 1.0, 1.25, 1.5};
    bool both_reservoirs = true;
};

enum class Family { affine, gbm, hydro, instance };

struct RunConfig {
    Family family = Family::affine;
    std::string instance_name;
    AffineParams affine;
    HydroParams hydro;
    GridConfig grid;
    SolverConfig solver;
    CertifyConfig certify;
    OracleConfig oracle;
    SimulateConfig simulate;
    WaterValueConfig water_value;
    std::optional<std::uint64_t> seed;
    std::size_t workers = 1;
    std::string out = "out";

    [[nodiscard]] TimeGrid time_grid() const { return TimeGrid(grid.horizon, grid.steps); }
};

inline SwitchingControl parse_control(const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where, "expected an array of {time, target}");
    SwitchingControl u;
    for (std::size_t i = 0; i < v.size(); ++i) {
        detail::Fields f(v[i], where + "[" + std::to_string(i) + "]");
        Switch s;
        s.time = f.require<double>("time");
        s.target = f.require<std::size_t>("target");
        f.done();
        u.switches.push_back(s);
    }
    return u;
}

inline AffineParams parse_affine(detail::Fields& f) {
    const auto dim = f.require<std::size_t>("dim");
    const auto m = f.require<std::size_t>("modes");
    if (dim == 0) throw ConfigError(f.path("dim"), "must be positive");
    if (m < 2) throw ConfigError(f.path("modes"), "at least two modes are required");
    auto a = AffineParams::zeros(dim, m);
    a.name = f.get<std::string>("name", "affine");
    a.initial_mode = f.get<std::size_t>("initial_mode", 0);
    if (a.initial_mode >= m) throw ConfigError(f.path("initial_mode"), "out of range");
    a.delay = f.get<double>("delay", 0.0);
    if (f.has("initial_state")) a.initial_state = detail::vector_of(f.raw("initial_state"), dim, f.path("initial_state"));
    const std::pair<const char*, ModeTable*> mode_tables[] = {
        {"drift_const", &a.drift_const},         {"drift_linear", &a.drift_linear},
        {"drift_delayed", &a.drift_delayed},     {"diffusion_const", &a.diffusion_const},
        {"diffusion_linear", &a.diffusion_linear}, {"jump_const", &a.jump_const},
        {"jump_linear", &a.jump_linear},         {"running_linear", &a.running_linear},
        {"running_quadratic", &a.running_quadratic}};
    for (const auto& [key, table] : mode_tables)
        if (f.has(key)) *table = detail::table_of(f.raw(key), m, dim, f.path(key));
    const std::pair<const char*, PairTable*> pair_tables[] = {{"map_scale", &a.map_scale},
                                                              {"map_shift", &a.map_shift},
                                                              {"cost_const", &a.cost_const},
                                                              {"cost_slope", &a.cost_slope}};
    for (const auto& [key, table] : pair_tables)
        if (f.has(key)) *table = detail::table_of(f.raw(key), m, m, f.path(key));
    a.jump_intensity = f.get<double>("jump_intensity", 0.0);
    if (f.has("marks")) a.marks = detail::marks_of(f.raw("marks"), dim, f.path("marks"));
    a.map_bound = f.get<double>("map_bound", 0.0);
    a.cycle_bound = f.get<std::size_t>("cycle_bound", 2);
    if (f.has("running_const")) a.running_const = detail::vector_of(f.raw("running_const"), m, f.path("running_const"));
    if (f.has("running_slope")) a.running_slope = detail::vector_of(f.raw("running_slope"), m, f.path("running_slope"));
    a.terminal_const = f.get<double>("terminal_const", 0.0);
    if (f.has("terminal_linear")) a.terminal_linear = detail::vector_of(f.raw("terminal_linear"), dim, f.path("terminal_linear"));
    if (f.has("terminal_quadratic")) {
        a.terminal_quadratic = detail::vector_of(f.raw("terminal_quadratic"), dim, f.path("terminal_quadratic"));
    }
    a.cost_floor = f.require<double>("cost_floor");
    a.growth_q = f.get<double>("growth_q", 2.0);
    a.growth_k = f.get<double>("growth_k", 1.0);
    f.done();
    try {
        a.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("$.problem.params", e.what());
    }
    return a;
}

inline HydroParams parse_hydro(detail::Fields& f) {
    HydroParams h;
    h.turbines1 = f.get("turbines1", h.turbines1);
    h.turbines2 = f.get("turbines2", h.turbines2);
    h.discharge1 = f.get("discharge1", h.discharge1);
    h.discharge2 = f.get("discharge2", h.discharge2);
    h.power_max1 = f.get("power_max1", h.power_max1);
    h.power_max2 = f.get("power_max2", h.power_max2);
    h.power_ref1 = f.get("power_ref1", h.power_ref1);
    h.power_ref2 = f.get("power_ref2", h.power_ref2);
    h.delay = f.get("delay", h.delay);
    h.inflow_mean1 = f.get("inflow_mean1", h.inflow_mean1);
    h.inflow_mean2 = f.get("inflow_mean2", h.inflow_mean2);
    h.inflow_reversion = f.get("inflow_reversion", h.inflow_reversion);
    h.inflow_vol = f.get("inflow_vol", h.inflow_vol);
    h.inflow_jump_intensity = f.get("inflow_jump_intensity", h.inflow_jump_intensity);
    if (f.has("inflow_marks")) h.inflow_marks = detail::marks_of(f.raw("inflow_marks"), 2, f.path("inflow_marks"));
    h.price_drift = f.get("price_drift", h.price_drift);
    h.price_vol = f.get("price_vol", h.price_vol);
    h.water_value1 = f.get("water_value1", h.water_value1);
    h.water_value2 = f.get("water_value2", h.water_value2);
    h.cost_base = f.get("cost_base", h.cost_base);
    h.cost_per_turbine = f.get("cost_per_turbine", h.cost_per_turbine);
    if (f.has("initial_state")) h.initial_state = detail::vector_of(f.raw("initial_state"), 5, f.path("initial_state"));
    h.initial_turbines1 = f.get("initial_turbines1", h.initial_turbines1);
    h.initial_turbines2 = f.get("initial_turbines2", h.initial_turbines2);
    if (f.has("capacity")) h.capacity = detail::Fields::convert<double>(f.raw("capacity"), f.path("capacity"));
    f.done();
    if (auto v = h.violations(); !v.empty()) throw ConfigError("$.problem.params", v.front());
    return h;
}

inline RunConfig parse_config(const json& root) {
    RunConfig c;
    detail::Fields top(root, "$");
    if (top.has("seed")) c.seed = top.get<std::uint64_t>("seed", 0);
    c.workers = top.get<std::size_t>("workers", 1);
    c.out = top.get<std::string>("out", "out");

    {
        auto g = top.sub("grid");
        c.grid.horizon = g.get("horizon", c.grid.horizon);
        c.grid.steps = g.get("steps", c.grid.steps);
        g.done();
        if (!(c.grid.horizon > 0.0)) throw ConfigError("$.grid.horizon", "must be positive");
        if (c.grid.steps == 0) throw ConfigError("$.grid.steps", "must be positive");
    }
    {
        if (!top.has("problem")) throw ConfigError("$.problem", "required field missing");
        auto p = top.sub("problem");
        const auto family = p.require<std::string>("family");
        auto params = p.sub("params");
        if (family == "affine") {
            c.family = Family::affine;
            c.affine = parse_affine(params);
        } else if (family == "gbm") {
            c.family = Family::gbm;
            const double mu = params.get("mu", 0.1), sigma = params.get("sigma", 0.2), x0 = params.get("x0", 1.0);
            params.done();
            c.affine = instances::gbm_params(mu, sigma, x0);
        } else if (family == "hydro") {
            c.family = Family::hydro;
            c.hydro = parse_hydro(params);
        } else if (family == "instance") {
            c.family = Family::instance;
            c.instance_name = params.require<std::string>("name");
            if (c.instance_name == "two_mode_deterministic") {
                c.affine = instances::two_mode_deterministic_params();
            } else if (c.instance_name == "pure_cost") {
                c.affine = instances::pure_cost_params(params.get<std::size_t>("modes", 3));
            } else if (c.instance_name == "delayed_ode") {
                c.affine = instances::delayed_ode_params();
            } else if (c.instance_name == "random_tree") {
                const auto m = params.get<std::size_t>("modes", 2);
                if (m < 2 || m > 3) throw ConfigError(params.path("modes"), "must be 2 or 3");
                c.affine = instances::random_tree_params(params.require<std::uint64_t>("seed"), m, c.grid.steps,
                                                         c.grid.horizon, params.get("delayed", false));
            } else {
                throw ConfigError(params.path("name"),
                                  "unknown instance (two_mode_deterministic, pure_cost, delayed_ode, random_tree)");
            }
            params.done();
        } else {
            throw ConfigError("$.problem.family", "unknown family '" + family + "' (affine, gbm, hydro, instance)");
        }
        p.done();
    }
    {
        auto s = top.sub("solver");
        c.solver.k_max = s.get("k_max", c.solver.k_max);
        c.solver.n_paths = s.get("n_paths", c.solver.n_paths);
        c.solver.degree = s.get("degree", c.solver.degree);
        c.solver.cross_terms = s.get("cross_terms", c.solver.cross_terms);
        c.solver.exploration = s.get("exploration", c.solver.exploration);
        c.solver.policy_rounds = s.get("policy_rounds", c.solver.policy_rounds);
        c.solver.picard_tol = s.get("picard_tol", c.solver.picard_tol);
        c.solver.probes_per_step = s.get("probes_per_step", c.solver.probes_per_step);
        c.solver.max_switches_per_instant = s.get("max_switches_per_instant", c.solver.max_switches_per_instant);
        s.done();
        if (c.solver.k_max < 1) throw ConfigError("$.solver.k_max", "must be at least 1");
        if (c.solver.n_paths < 2) throw ConfigError("$.solver.n_paths", "must be at least 2");
        if (c.solver.degree < 0) throw ConfigError("$.solver.degree", "must be nonnegative");
        if (!(c.solver.exploration >= 0.0 && c.solver.exploration <= 1.0)) {
            throw ConfigError("$.solver.exploration", "must lie in [0, 1]");
        }
    }
    {
        auto s = top.sub("certify");
        c.certify.n_paths = s.get("n_paths", c.certify.n_paths);
        if (s.has("seed")) c.certify.seed = s.get<std::uint64_t>("seed", 0);
        s.done();
        if (c.certify.n_paths == 0) throw ConfigError("$.certify.n_paths", "must be positive");
        if (c.certify.seed && c.seed && *c.certify.seed == *c.seed) {
            throw ConfigError("$.certify.seed", "must differ from the training seed");
        }
    }
    {
        auto s = top.sub("oracle");
        c.oracle.branching = s.get("branching", c.oracle.branching);
        c.oracle.jumps = s.get("jumps", c.oracle.jumps);
        c.oracle.k_max = s.get("k_max", c.oracle.k_max);
        c.oracle.enumerate = s.get("enumerate", c.oracle.enumerate);
        c.oracle.rel_tol = s.get("rel_tol", c.oracle.rel_tol);
        c.oracle.se_mult = s.get("se_mult", c.oracle.se_mult);
        s.done();
        if (c.oracle.branching < 1 || c.oracle.branching > 3) throw ConfigError("$.oracle.branching", "must be 1, 2 or 3");
    }
    {
        auto s = top.sub("simulate");
        c.simulate.n_paths = s.get("n_paths", c.simulate.n_paths);
        c.simulate.export_paths = s.get("export_paths", c.simulate.export_paths);
        if (s.has("control")) c.simulate.control = parse_control(s.raw("control"), "$.simulate.control");
        s.done();
        if (c.simulate.n_paths == 0) throw ConfigError("$.simulate.n_paths", "must be positive");
    }
    {
        auto s = top.sub("water_value");
        if (s.has("levels")) {
            const auto& lv = s.raw("levels");
            if (!lv.is_array() || lv.size() < 3) throw ConfigError("$.water_value.levels", "need at least three levels");
            c.water_value.levels = detail::vector_of(lv, lv.size(), "$.water_value.levels");
            for (std::size_t j = 1; j < c.water_value.levels.size(); ++j)
                if (!(c.water_value.levels[j] > c.water_value.levels[j - 1])) {
                    throw ConfigError("$.water_value.levels", "must be strictly increasing");
                }
        }
        c.water_value.both_reservoirs = s.get("both_reservoirs", c.water_value.both_reservoirs);
        s.done();
    }
    top.done();
    return c;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path, std::string("malformed JSON: ") + e.what());
    }
}

inline RunConfig load_config(const std::string& path) { return parse_config(read_json_file(path)); }

inline bool is_hydro(const RunConfig& c) { return c.family == Family::hydro; }

inline std::shared_ptr<const SwitchingProblem> build_problem(const RunConfig& c) {
    if (is_hydro(c)) return std::make_shared<const SwitchingProblem>(build_hydro_problem(c.hydro));
    return std::make_shared<const SwitchingProblem>(build_affine_problem(c.affine));
}

/// Solver settings of a run; hydro problems use the hydro feature map.
inline SolverSettings solver_settings(const RunConfig& c, std::uint64_t seed) {
    SolverSettings s;
    s.k_max = c.solver.k_max;
    s.n_paths = c.solver.n_paths;
    s.seed = seed;
    s.features.degree = c.solver.degree;
    s.features.cross_terms = c.solver.cross_terms;
    s.exploration = c.solver.exploration;
    s.policy_rounds = c.solver.policy_rounds;
    s.picard_tol = c.solver.picard_tol;
    s.probes_per_step = c.solver.probes_per_step;
    s.max_switches_per_instant = c.solver.max_switches_per_instant;
    s.workers = c.workers;
    if (is_hydro(c)) s.feature_map = hydro_features(c.hydro, c.solver.degree, c.solver.cross_terms);
    return s;
}

/// Certification seed: explicit, or derived from the run seed (never equal to it).
inline std::uint64_t certification_seed(const RunConfig& c, std::uint64_t seed) {
    if (c.certify.seed) {
        if (*c.certify.seed == seed) throw ConfigError("$.certify.seed", "must differ from the training seed");
        return *c.certify.seed;
    }
    std::uint64_t s = derive_seed(seed, streams::certification, 0);
    return s == seed ? s + 1 : s;
}

}  // namespace oswitch::io
