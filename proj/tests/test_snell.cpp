#include <gtest/gtest.h>

#include <random>

#include "oswitch/io/json.hpp"
#include "oswitch/snell.hpp"
#include "support.hpp"

using namespace oswitch;

namespace {

ScenarioTree chain(std::size_t levels) {
    ScenarioTree t({0.0});
    std::size_t node = 0;
    for (std::size_t l = 0; l < levels; ++l) node = t.add_child(node, 1.0, {static_cast<double>(l + 1)});
    return t;
}

ScenarioTree binary_one_level() {
    ScenarioTree t({0.0});
    t.add_child(0, 0.5, {1.0});
    t.add_child(0, 0.5, {-1.0});
    return t;
}

}  // namespace

TEST(SnellEnvelope, DeterministicChainTakesFutureMaximum) {
    const auto t = chain(1);
    EXPECT_EQ(snell_envelope(t, {1.0, 3.0}), (TreeProcess{3.0, 3.0}));
}

TEST(SnellEnvelope, SupermartingalePayoffIsItsOwnEnvelope) {
    ScenarioTree t({0.0});
    const auto a = t.add_child(0, 0.3, {});
    const auto b = t.add_child(0, 0.7, {});
    t.add_child(a, 1.0, {});
    t.add_child(b, 0.5, {});
    t.add_child(b, 0.5, {});
    const TreeProcess u{5.0, 4.0, 2.0, 3.5, 1.0, 3.0};
    ASSERT_TRUE(is_supermartingale(t, u));
    EXPECT_EQ(snell_envelope(t, u), u);
}

TEST(SnellEnvelope, BinaryExampleValueTwo) {
    const auto t = binary_one_level();
    const TreeProcess u{0.0, 4.0, 0.0};
    const auto z = snell_envelope(t, u);
    EXPECT_DOUBLE_EQ(z[0], 2.0);
    // Brute force over the two stopping rules at the root.
    const double stop_now = u[0];
    const double go_on = 0.5 * u[1] + 0.5 * u[2];
    EXPECT_DOUBLE_EQ(z[0], std::max(stop_now, go_on));
}

TEST(SnellEnvelope, RejectsNonFinitePayoff) {
    const auto t = binary_one_level();
    EXPECT_THROW(snell_envelope(t, {0.0, std::nan(""), 1.0}), std::invalid_argument);
    EXPECT_THROW(snell_envelope(t, {0.0, 1.0}), std::invalid_argument);
}

TEST(StoppingRule, ConstantPayoffStopsAtRoot) {
    std::mt19937_64 gen(3);
    const auto t = testsupport::random_tree(gen, 3, 3);
    const TreeProcess u(t.size(), 1.25);
    const auto stop = optimal_stopping_rule(t, u);
    EXPECT_TRUE(stop[0]);
    EXPECT_DOUBLE_EQ(stopping_value(t, u, stop), 1.25);
}

TEST(StoppingRule, BinaryExampleContinuesAtRoot) {
    const auto t = binary_one_level();
    const TreeProcess u{0.0, 4.0, 0.0};
    const auto stop = optimal_stopping_rule(t, u);
    EXPECT_FALSE(stop[0]);
    EXPECT_TRUE(stop[1]);
    EXPECT_TRUE(stop[2]);
    EXPECT_DOUBLE_EQ(stopping_value(t, u, stop), 2.0);
}

TEST(StoppingRule, IncreasingDeterministicPayoffStopsOnlyAtLeaf) {
    const auto t = chain(4);
    const TreeProcess u{0.0, 1.0, 2.0, 3.0, 4.0};
    const auto stop = optimal_stopping_rule(t, u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_FALSE(stop[i]) << i;
    EXPECT_TRUE(stop[4]);
}

TEST(StoppingRule, TiesStop) {
    const auto t = binary_one_level();
    const TreeProcess u{2.0, 4.0, 0.0};
    EXPECT_TRUE(optimal_stopping_rule(t, u)[0]);
}

TEST(SnellProperties, RandomTrees) {
    std::mt19937_64 gen(20240611);
    for (int trial = 0; trial < 100; ++trial) {
        const auto tree = testsupport::random_tree(gen, 1 + trial % 5, 3);
        tree.validate();
        const auto u = testsupport::random_process(gen, tree);
        const auto z = snell_envelope(tree, u);
        EXPECT_TRUE(dominates(z, u)) << trial;
        EXPECT_TRUE(is_supermartingale(tree, z)) << trial;
        for (int k = 0; k < 100; ++k) {
            const auto w = testsupport::random_dominating_supermartingale(gen, tree, u);
            ASSERT_TRUE(dominates(w, u));
            ASSERT_TRUE(is_supermartingale(tree, w));
            EXPECT_TRUE(dominates(w, z)) << trial << "/" << k;
        }
        EXPECT_NEAR(stopping_value(tree, u, optimal_stopping_rule(tree, u, z)), z[0], 1e-12) << trial;
    }
}

TEST(EnvelopeLimit, ConstantSequenceHasZeroDeviation) {
    std::mt19937_64 gen(5);
    const auto tree = testsupport::random_tree(gen, 3, 2);
    const auto u = testsupport::random_process(gen, tree);
    const auto r = envelope_limit_check(tree, {u, u, u}, u);
    EXPECT_EQ(r.max_deviation, 0.0);
    EXPECT_TRUE(r.monotone);
}

TEST(EnvelopeLimit, ShiftedSequenceWithinOneOverK) {
    std::mt19937_64 gen(6);
    const auto tree = testsupport::random_tree(gen, 4, 3);
    const auto u = testsupport::random_process(gen, tree);
    std::vector<TreeProcess> seq;
    for (int k = 1; k <= 10; ++k) {
        auto uk = u;
        for (auto& v : uk) v -= 1.0 / k;
        seq.push_back(uk);
    }
    const auto r = envelope_limit_check(tree, seq, u);
    for (std::size_t k = 0; k < r.deviations.size(); ++k) {
        EXPECT_LE(r.deviations[k], 1.0 / static_cast<double>(k + 1) + 1e-12);
    }
    EXPECT_TRUE(r.monotone);
}

TEST(EnvelopeLimit, IncreasingSequenceHasDecreasingDeviations) {
    std::mt19937_64 gen(7);
    const auto tree = testsupport::random_tree(gen, 4, 2);
    const auto u = testsupport::random_process(gen, tree);
    std::uniform_real_distribution<double> gap(0.0, 1.0);
    TreeProcess base(tree.size());
    for (auto& g : base) g = gap(gen);
    std::vector<TreeProcess> seq;
    for (int k = 1; k <= 8; ++k) {
        auto uk = u;
        for (std::size_t i = 0; i < uk.size(); ++i) uk[i] -= base[i] / (k * k);
        seq.push_back(uk);
    }
    EXPECT_TRUE(envelope_limit_check(tree, seq, u).monotone);
}

TEST(ScenarioTree, ValidationCatchesBadProbabilities) {
    ScenarioTree t({0.0});
    t.add_child(0, 0.5, {});
    t.add_child(0, 0.4, {});
    EXPECT_THROW(t.validate(), std::invalid_argument);
    EXPECT_THROW(t.add_child(0, 1.5, {}), std::invalid_argument);
    EXPECT_THROW(t.add_child(9, 0.5, {}), std::out_of_range);
}

TEST(ScenarioTree, JsonRoundTrip) {
    std::mt19937_64 gen(8);
    const auto tree = testsupport::random_tree(gen, 3, 3);
    const auto j = io::to_json(tree);
    const auto back = io::tree_from_json(j);
    ASSERT_EQ(back.size(), tree.size());
    for (std::size_t i = 0; i < tree.size(); ++i) {
        EXPECT_EQ(back.node(i).parent, tree.node(i).parent);
        EXPECT_EQ(back.node(i).prob, tree.node(i).prob);
        EXPECT_EQ(back.node(i).state, tree.node(i).state);
        EXPECT_EQ(back.node(i).level, tree.node(i).level);
    }
    EXPECT_EQ(io::to_json(back).dump(), j.dump());
}
