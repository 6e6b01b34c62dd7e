// oswitch: validate, simulate, solve, certify and compare optimal switching
// problems from a JSON run configuration.
//
// Exit codes: 0 success, 1 validation or tolerance failure, 2 configuration error.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "oswitch/io/config.hpp"
#include "oswitch/io/csv.hpp"
#include "oswitch/io/json.hpp"
#include "oswitch/oracle.hpp"
#include "oswitch/solver.hpp"

namespace fs = std::filesystem;
using namespace oswitch;
using io::json;

namespace {

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kConfigError = 2;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::string> out;
    std::string control;
};

struct Run {
    io::RunConfig cfg;
    std::uint64_t seed = 0;
    fs::path out;
};

Run prepare(const Options& o) {
    Run r;
    r.cfg = io::load_config(o.config);
    if (o.seed) r.cfg.seed = o.seed;
    if (!r.cfg.seed) throw io::ConfigError("$.seed", "a seed is required (config field or --seed)");
    r.seed = *r.cfg.seed;
    if (o.workers) r.cfg.workers = *o.workers;
    if (r.cfg.workers == 0) throw io::ConfigError("--workers", "must be positive");
    r.out = o.out ? fs::path(*o.out) : fs::path(r.cfg.out);
    fs::create_directories(r.out);
    return r;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << s;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

template <class F>
void write_stream(const fs::path& p, F&& f) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    f(os);
}

class Timer {
public:
    explicit Timer(std::string what) : what_(std::move(what)), start_(std::chrono::steady_clock::now()) {}
    ~Timer() {
        const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start_;
        std::cerr << what_ << ": " << d.count() << " s\n";
    }

private:
    std::string what_;
    std::chrono::steady_clock::time_point start_;
};

json certificate_report(const Certificate& c, const SwitchingProblem& p) {
    json j = io::to_json(c);
    const auto g = check_gap(c);
    const double bound = switch_count_bound(c, p.modes.count, p.costs.floor);
    j["gap_lower_limit"] = g.lower;
    j["gap_upper_limit"] = g.upper;
    j["gap_ok"] = g.ok;
    j["switch_bound"] = std::isfinite(bound) ? json(bound) : json(nullptr);
    j["switch_bound_ok"] = static_cast<double>(c.max_switches) <= bound;
    j["terminal_ok"] = c.terminal_switches == 0;
    return j;
}

bool certificate_ok(const json& j) {
    return j["gap_ok"].get<bool>() && j["switch_bound_ok"].get<bool>() && j["terminal_ok"].get<bool>();
}

struct Solved {
    std::shared_ptr<const ValueSurface> surface;
    Certificate certificate;
    json report;
};

Solved solve_and_certify(const Run& r, std::shared_ptr<const SwitchingProblem> p, const SolverSettings& s,
                         NoiseModel model = {}) {
    const auto grid = r.cfg.time_grid();
    Solved out;
    {
        Timer t("solve");
        out.surface = std::make_shared<const ValueSurface>(solve(p, grid, s));
    }
    const auto policy = extract_policy(out.surface);
    const auto cert_seed = io::certification_seed(r.cfg, r.seed);
    {
        Timer t("certify");
        out.certificate = certify(policy, *p, grid, r.cfg.certify.n_paths, cert_seed, s.seed, model, r.cfg.workers);
    }
    out.report = certificate_report(out.certificate, *p);
    out.report["seed"] = cert_seed;
    return out;
}

int cmd_validate(const Options& o) {
    const auto r = prepare(o);
    const auto p = io::build_problem(r.cfg);
    const auto report = io::validate_problem(*p, r.cfg.time_grid());
    write_json(r.out / "validation.json", io::to_json(report));
    for (const auto& c : report.checks) {
        std::cout << (c.ok ? "ok    " : "FAIL  ") << c.name;
        if (!c.ok) std::cout << "  witness " << c.witness.dump();
        std::cout << '\n';
    }
    return report.ok() ? kOk : kFail;
}

SwitchingControl load_control(const Options& o, const Run& r) {
    if (o.control.empty()) return r.cfg.simulate.control;
    const auto j = io::read_json_file(o.control);
    if (j.is_array()) return io::parse_control(j, o.control);
    io::detail::Fields f(j, o.control);
    auto u = io::parse_control(f.raw("switches"), o.control + ".switches");
    f.done();
    return u;
}

int cmd_simulate(const Options& o) {
    const auto r = prepare(o);
    const auto p = io::build_problem(r.cfg);
    const auto grid = r.cfg.time_grid();
    const auto u = load_control(o, r);
    if (auto v = validate_control(u, p->modes, grid)) {
        throw io::ConfigError("control[" + std::to_string(v->index) + "]", v->message);
    }
    McEstimate est;
    {
        Timer t("simulate");
        est = evaluate_reward(*p, grid, u, r.cfg.simulate.n_paths, r.seed, {}, r.cfg.workers);
    }
    const std::size_t exported = std::min(r.cfg.simulate.export_paths, r.cfg.simulate.n_paths);
    for (std::size_t s = 0; s < exported; ++s) {
        const auto noise = sample_noise(p->dynamics, grid, derive_seed(r.seed, streams::noise, s));
        const auto path = simulate_path(p->dynamics, grid, p->modes.initial, u, noise);
        char name[32];
        std::snprintf(name, sizeof name, "path_%03zu.csv", s);
        write_stream(r.out / name, [&](std::ostream& os) { io::write_path_csv(os, path, grid); });
    }
    json control = json::array();
    for (const auto& sw : u.switches) control.push_back({{"time", sw.time}, {"target", sw.target}});
    write_json(r.out / "summary.json", {{"problem", p->name},
                                        {"seed", r.seed},
                                        {"n_paths", est.n},
                                        {"J", est.mean},
                                        {"se", est.se},
                                        {"control", control},
                                        {"exported_paths", exported}});
    std::cout << "J = " << io::num(est.mean) << "  (SE " << io::num(est.se) << ", " << est.n << " paths)\n";
    return kOk;
}

int report_solve(const Run& r, const SwitchingProblem& p, const Solved& s, const std::string& tag) {
    json diag = io::diagnostics(*s.surface);
    diag["problem"] = p.name;
    diag["seed"] = r.seed;
    diag["certificate"] = s.report;
    write_json(r.out / (tag + ".json"), diag);
    write_stream(r.out / "surfaces.csv", [&](std::ostream& os) { io::write_surface_csv(os, *s.surface); });
    const auto& c = s.certificate;
    std::cout << "Y0 = " << io::num(s.surface->y0()) << "  (SE " << io::num(s.surface->y0_se()) << ", k = "
              << s.surface->k_top() << (s.surface->converged() ? ", converged" : ", not converged") << ")\n"
              << "J(policy) = " << io::num(c.lower_bound.mean) << "  (SE " << io::num(c.lower_bound.se) << ")\n"
              << "gap = " << io::num(c.gap) << "  allowed [" << io::num(s.report["gap_lower_limit"].get<double>())
              << ", " << io::num(s.report["gap_upper_limit"].get<double>()) << "]\n"
              << "max switches = " << c.max_switches << ", terminal switches = " << c.terminal_switches << '\n';
    for (const auto& w : s.surface->warnings()) std::cout << "warning: " << w << '\n';
    if (!certificate_ok(s.report)) {
        std::cout << "FAIL: certificate outside tolerance\n";
        return kFail;
    }
    return kOk;
}

int cmd_solve(const Options& o) {
    const auto r = prepare(o);
    const auto p = io::build_problem(r.cfg);
    const auto s = solve_and_certify(r, p, io::solver_settings(r.cfg, r.seed));
    return report_solve(r, *p, s, "diagnostics");
}

int cmd_compare_oracle(const Options& o) {
    const auto r = prepare(o);
    const auto p = io::build_problem(r.cfg);
    const auto grid = r.cfg.time_grid();
    const auto& oc = r.cfg.oracle;
    if (p->dynamics.jump_intensity > 0.0 && !oc.jumps) {
        throw io::ConfigError("$.oracle.jumps", "the problem has jumps; the lattice must model them");
    }
    OracleInstance inst;
    DpResult dp;
    {
        Timer t("oracle");
        inst = build_lattice(p, grid, oc.branching, oc.jumps);
        dp = exact_dp(inst, oc.k_max);
    }
    json report{{"problem", p->name}, {"seed", r.seed}, {"instance", io::to_json(inst)}, {"exact", io::to_json(dp)}};
    const ModeIndex b0 = p->modes.initial;
    bool ok = true;
    if (oc.enumerate) {
        Timer t("enumerate");
        const auto en = enumerate_controls(inst, oc.k_max);
        const double d = std::abs(en.value - dp.root_value(oc.k_max, b0));
        report["enumeration"] = io::to_json(en);
        report["enumeration_deviation"] = d;
        const bool match = d <= 1e-12 * std::max(1.0, std::abs(en.value));
        report["enumeration_ok"] = match;
        ok = ok && match;
        std::cout << "enumeration = " << io::num(en.value) << "  dp = " << io::num(dp.root_value(oc.k_max, b0))
                  << (match ? "  ok\n" : "  MISMATCH\n");
    }
    auto settings = io::solver_settings(r.cfg, r.seed);
    settings.k_max = oc.k_max;
    settings.noise = inst.noise_model();
    std::shared_ptr<const ValueSurface> surf;
    {
        Timer t("solve");
        surf = std::make_shared<const ValueSurface>(solve(p, grid, settings));
    }
    json rows = json::array();
    double max_dev = 0.0;
    std::cout << "k  exact  rmc  se  deviation  allowed\n";
    for (std::size_t k = 0; k <= oc.k_max; ++k) {
        const double exact = dp.root_value(k, b0);
        const double est = surf->y0(k), se = surf->y0_se(k);
        const double dev = std::abs(est - exact);
        const double allowed = oc.se_mult * se + oc.rel_tol * std::abs(exact);
        const bool row_ok = dev <= allowed + 1e-12;
        ok = ok && row_ok;
        max_dev = std::max(max_dev, dev);
        rows.push_back({{"k", k}, {"exact", exact}, {"rmc", est}, {"rmc_se", se}, {"deviation", dev},
                        {"allowed", allowed}, {"ok", row_ok}});
        std::cout << k << "  " << io::num(exact) << "  " << io::num(est) << "  " << io::num(se) << "  "
                  << io::num(dev) << "  " << io::num(allowed) << (row_ok ? "" : "  FAIL") << '\n';
    }
    report["comparison"] = rows;
    report["max_deviation"] = max_dev;
    report["solver"] = io::diagnostics(*surf);
    report["ok"] = ok;
    write_json(r.out / "oracle_comparison.json", report);
    return ok ? kOk : kFail;
}

void require_hydro(const Run& r) {
    if (!io::is_hydro(r.cfg)) throw io::ConfigError("$.problem.family", "this command needs the hydro family");
}

int cmd_hydro_demo(const Options& o) {
    const auto r = prepare(o);
    require_hydro(r);
    const auto p = io::build_problem(r.cfg);
    const auto grid = r.cfg.time_grid();
    const auto validation = io::validate_problem(*p, grid);
    write_json(r.out / "validation.json", io::to_json(validation));
    if (!validation.ok()) {
        std::cout << "FAIL: standing assumptions violated, see validation.json\n";
        return kFail;
    }
    const auto s = solve_and_certify(r, p, io::solver_settings(r.cfg, r.seed));
    const int code = report_solve(r, *p, s, "hydro_demo");
    // A few policy-driven paths on the certification stream.
    const auto policy = extract_policy(s.surface);
    const auto cert_seed = io::certification_seed(r.cfg, r.seed);
    const std::size_t exported = std::min(r.cfg.simulate.export_paths, r.cfg.certify.n_paths);
    for (std::size_t k = 0; k < exported; ++k) {
        const auto noise = sample_noise(p->dynamics, grid, derive_seed(cert_seed, streams::certification, k));
        std::size_t used = 0;
        const std::size_t budget = policy.initial_budget();
        const auto path = simulate_with(p->dynamics, grid, p->modes.initial, noise,
                                        [&](std::size_t i, const Path& partial, ModeIndex cur, std::vector<ModeIndex>& out) {
                                            out = policy.decide(i, partial, cur, budget - used);
                                            used += out.size();
                                        });
        char name[40];
        std::snprintf(name, sizeof name, "policy_path_%03zu.csv", k);
        write_stream(r.out / name, [&](std::ostream& os) { io::write_path_csv(os, path, grid); });
    }
    return code;
}

int cmd_water_value(const Options& o) {
    const auto r = prepare(o);
    require_hydro(r);
    const auto grid = r.cfg.time_grid();
    WaterValueCurve curve;
    {
        Timer t("water-value");
        curve = water_value_curve(r.cfg.hydro, grid, io::solver_settings(r.cfg, r.seed), r.cfg.water_value.levels,
                                  r.cfg.water_value.both_reservoirs);
    }
    write_stream(r.out / "water_value.csv", [&](std::ostream& os) { io::write_water_value_csv(os, curve); });
    const bool monotone = curve.nondecreasing();
    const bool dominates = curve.reservoir1_dominates();
    if (r.cfg.water_value.both_reservoirs) {
        write_stream(r.out / "marginal_value.csv", [&](std::ostream& os) { io::write_marginal_csv(os, curve); });
    }
    json points = json::array();
    for (const auto* c : {&curve.reservoir1, &curve.reservoir2})
        for (const auto& pt : *c) points.push_back({{"reservoir", c == &curve.reservoir1 ? 1 : 2}, {"level", pt.level},
                                                    {"value", pt.value}, {"se", pt.se}});
    write_json(r.out / "water_value.json", {{"seed", r.seed},
                                            {"points", points},
                                            {"marginal_levels", curve.marginal_levels},
                                            {"marginal1", curve.marginal1},
                                            {"marginal2", curve.marginal2},
                                            {"nondecreasing", monotone},
                                            {"reservoir1_dominates", dominates}});
    std::cout << "level  Y0(Z1)  Y0(Z2)\n";
    for (std::size_t j = 0; j < curve.reservoir1.size(); ++j) {
        std::cout << io::num(curve.reservoir1[j].level) << "  " << io::num(curve.reservoir1[j].value);
        if (j < curve.reservoir2.size()) std::cout << "  " << io::num(curve.reservoir2[j].value);
        std::cout << '\n';
    }
    std::cout << "nondecreasing: " << (monotone ? "yes" : "NO") << "\nreservoir 1 marginal >= reservoir 2: "
              << (dominates ? "yes" : "NO") << '\n';
    return monotone && dominates ? kOk : kFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal switching with delay: validation, regression Monte Carlo, certification"};
    app.require_subcommand(1);
    Options opt;
    std::uint64_t seed = 0;
    std::size_t workers = 0;
    std::string out;

    struct Command {
        const char* name;
        const char* help;
        int (*run)(const Options&);
    };
    const Command commands[] = {
        {"validate", "check the standing assumptions on the configured problem", cmd_validate},
        {"simulate", "simulate paths under a fixed control and estimate J", cmd_simulate},
        {"solve", "solve, extract the policy and certify it on fresh paths", cmd_solve},
        {"compare-oracle", "compare the solver with the exact tree oracle", cmd_compare_oracle},
        {"hydro-demo", "validate, solve and certify the two-plant hydro problem", cmd_hydro_demo},
        {"water-value", "value as a function of the initial reservoir volumes", cmd_water_value},
    };
    std::vector<CLI::App*> subs;
    for (const auto& c : commands) {
        auto* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", opt.config, "run configuration (JSON)")->required();
        sub->add_option("--seed", seed, "root seed, overrides the config");
        sub->add_option("--workers", workers, "worker threads, overrides the config");
        sub->add_option("--out", out, "output directory, overrides the config");
        if (std::string(c.name) == "simulate") {
            sub->add_option("--control", opt.control, "control file: [{time, target}, ...]");
        }
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }
    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        if (subs[i]->count("--seed")) opt.seed = seed;
        if (subs[i]->count("--workers")) opt.workers = workers;
        if (subs[i]->count("--out")) opt.out = out;
        try {
            return commands[i].run(opt);
        } catch (const io::ConfigError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return kConfigError;
        } catch (const std::invalid_argument& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return kConfigError;
        } catch (const std::length_error& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return kConfigError;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return kFail;
        }
    }
    return kConfigError;
}
