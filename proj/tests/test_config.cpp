#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "oswitch/io/config.hpp"

using namespace oswitch;
using namespace oswitch::io;

namespace {

json minimal() {
    return json::parse(R"({
        "seed": 3,
        "problem": {"family": "instance", "params": {"name": "two_mode_deterministic"}},
        "grid": {"steps": 10}
    })");
}

std::string error_path(const json& j) {
    try {
        (void)parse_config(j);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "";
}

}  // namespace

TEST(Config, MinimalInstanceUsesDefaults) {
    const auto c = parse_config(minimal());
    EXPECT_EQ(c.family, Family::instance);
    EXPECT_EQ(c.seed, 3u);
    EXPECT_EQ(c.grid.horizon, 1.0);
    EXPECT_EQ(c.grid.steps, 10u);
    EXPECT_EQ(c.solver.k_max, 8u);
    EXPECT_EQ(c.solver.policy_rounds, 1u);
    EXPECT_EQ(c.oracle.rel_tol, 0.02);
    EXPECT_EQ(c.oracle.se_mult, 3.0);
    EXPECT_EQ(c.workers, 1u);
    EXPECT_EQ(build_problem(c)->modes.count, 2u);
}

TEST(Config, UnknownKeysAreRejectedWithTheirPath) {
    auto j = minimal();
    j["bogus"] = 1;
    EXPECT_EQ(error_path(j), "$.bogus");
    j = minimal();
    j["problem"]["params"]["bogus"] = 1;
    EXPECT_EQ(error_path(j), "$.problem.params.bogus");
    j = minimal();
    j["solver"] = {{"kmax", 3}};
    EXPECT_EQ(error_path(j), "$.solver.kmax");
    j = minimal();
    j["simulate"] = {{"control", {{{"time", 0.0}, {"target", 1}, {"extra", 2}}}}};
    EXPECT_EQ(error_path(j), "$.simulate.control[0].extra");
}

TEST(Config, TypeErrorsNameTheField) {
    auto j = minimal();
    j["grid"]["steps"] = "ten";
    EXPECT_EQ(error_path(j), "$.grid.steps");
    j = minimal();
    j["grid"]["steps"] = -4;
    EXPECT_EQ(error_path(j), "$.grid.steps");
    j = minimal();
    j["oracle"] = {{"jumps", 1}};
    EXPECT_EQ(error_path(j), "$.oracle.jumps");
    j = minimal();
    j["solver"] = {{"exploration", 2.0}};
    EXPECT_EQ(error_path(j), "$.solver.exploration");
}

TEST(Config, RequiredFields) {
    auto j = minimal();
    j.erase("problem");
    EXPECT_EQ(error_path(j), "$.problem");
    j = minimal();
    j["problem"] = {{"family", "affine"}, {"params", {{"modes", 2}, {"cost_floor", 0.1}}}};
    EXPECT_EQ(error_path(j), "$.problem.params.dim");
    j = minimal();
    j["problem"]["family"] = "quantum";
    EXPECT_EQ(error_path(j), "$.problem.family");
    j = minimal();
    j["problem"]["params"]["name"] = "nope";
    EXPECT_EQ(error_path(j), "$.problem.params.name");
}

TEST(Config, Instances) {
    auto j = minimal();
    j["problem"]["params"] = {{"name", "pure_cost"}, {"modes", 4}};
    EXPECT_EQ(build_problem(parse_config(j))->modes.count, 4u);
    j["problem"]["params"] = {{"name", "random_tree"}, {"seed", 2}, {"modes", 3}, {"delayed", true}};
    const auto c = parse_config(j);
    EXPECT_EQ(c.affine.modes, 3u);
    EXPECT_DOUBLE_EQ(c.affine.delay, 0.1);
    j["problem"]["params"]["modes"] = 4;
    EXPECT_EQ(error_path(j), "$.problem.params.modes");
    j["problem"] = {{"family", "gbm"}, {"params", {{"mu", 0.05}}}};
    EXPECT_EQ(parse_config(j).family, Family::gbm);
}

TEST(Config, HydroViolationIsAConfigError) {
    auto j = minimal();
    j["problem"] = {{"family", "hydro"}, {"params", {{"discharge1", -1.0}}}};
    try {
        (void)parse_config(j);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.path(), "$.problem.params");
        EXPECT_NE(std::string(e.what()).find("discharge1"), std::string::npos);
    }
    j["problem"]["params"] = json::object();
    const auto c = parse_config(j);
    EXPECT_TRUE(is_hydro(c));
    EXPECT_EQ(solver_settings(c, 1).feature_map->raw_dim(), 7u);
}

TEST(Config, WaterValueLevels) {
    auto j = minimal();
    j["water_value"] = {{"levels", {1.0, 0.5, 2.0}}};
    EXPECT_EQ(error_path(j), "$.water_value.levels");
    j["water_value"] = {{"levels", {1.0, 2.0}}};
    EXPECT_EQ(error_path(j), "$.water_value.levels");
}

TEST(Config, CertificationSeedDiffersFromTrainingSeed) {
    auto c = parse_config(minimal());
    for (std::uint64_t seed : {0ull, 1ull, 3ull, 12345ull, ~0ull}) EXPECT_NE(certification_seed(c, seed), seed);
    c.certify.seed = 9;
    EXPECT_EQ(certification_seed(c, 3), 9u);
    EXPECT_THROW((void)certification_seed(c, 9), ConfigError);
    auto j = minimal();
    j["certify"] = {{"seed", 3}};
    EXPECT_EQ(error_path(j), "$.certify.seed");
}

TEST(Config, MalformedFile) {
    const auto dir = std::filesystem::temp_directory_path() / "oswitch_config_test";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "bad.json").string();
    std::ofstream(path) << "{ \"seed\": 1, ";
    EXPECT_THROW((void)load_config(path), ConfigError);
    EXPECT_THROW((void)load_config((dir / "missing.json").string()), ConfigError);
}

TEST(Config, PackagedConfigsParse) {
    for (const auto& e : std::filesystem::directory_iterator(OSWITCH_CONFIGS)) {
        if (e.path().extension() != ".json") continue;
        EXPECT_NO_THROW((void)build_problem(load_config(e.path().string()))) << e.path();
    }
}
