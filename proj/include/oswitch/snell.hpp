#pragma once

// Finite scenario trees and exact Snell envelopes on them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace oswitch {

/// Non-recombining tree. Nodes are stored so that every parent precedes its
/// children; the root is node 0.
class ScenarioTree {
public:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    struct Node {
        std::size_t parent = npos;
        std::size_t level = 0;
        double prob = 1.0;  ///< transition probability from the parent
        std::vector<std::size_t> children;
        std::vector<double> state;
    };

    ScenarioTree() = default;
    explicit ScenarioTree(std::vector<double> root_state) { add_root(std::move(root_state)); }

    std::size_t add_root(std::vector<double> state) {
        if (!nodes_.empty()) throw std::logic_error("ScenarioTree: root already present");
        nodes_.push_back(Node{npos, 0, 1.0, {}, std::move(state)});
        return 0;
    }

    std::size_t add_child(std::size_t parent, double prob, std::vector<double> state) {
        if (parent >= nodes_.size()) throw std::out_of_range("ScenarioTree: bad parent");
        if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("ScenarioTree: probability outside [0,1]");
        const std::size_t id = nodes_.size();
        nodes_.push_back(Node{parent, nodes_[parent].level + 1, prob, {}, std::move(state)});
        nodes_[parent].children.push_back(id);
        return id;
    }

    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] const Node& node(std::size_t i) const { return nodes_.at(i); }
    [[nodiscard]] Node& node(std::size_t i) { return nodes_.at(i); }
    [[nodiscard]] bool is_leaf(std::size_t i) const { return nodes_.at(i).children.empty(); }
    [[nodiscard]] const std::vector<Node>& nodes() const noexcept { return nodes_; }

    [[nodiscard]] std::size_t depth() const noexcept {
        std::size_t d = 0;
        for (const auto& n : nodes_) d = std::max(d, n.level);
        return d;
    }

    /// Unconditional probability of reaching node i.
    [[nodiscard]] double reach_probability(std::size_t i) const {
        double p = 1.0;
        for (; i != npos; i = nodes_.at(i).parent) p *= nodes_[i].prob;
        return p;
    }

    /// Throws unless child probabilities sum to one (1e-12) at every internal node.
    void validate() const {
        if (nodes_.empty()) throw std::invalid_argument("ScenarioTree: empty");
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const auto& n = nodes_[i];
            if (i > 0 && (n.parent == npos || n.parent >= i)) {
                throw std::invalid_argument("ScenarioTree: parent must precede child");
            }
            if (n.children.empty()) continue;
            double total = 0.0;
            for (auto c : n.children) total += nodes_[c].prob;
            if (std::abs(total - 1.0) > 1e-12) {
                throw std::invalid_argument("ScenarioTree: child probabilities do not sum to one");
            }
        }
    }

private:
    std::vector<Node> nodes_;
};

/// One real value per tree node.
using TreeProcess = std::vector<double>;

inline double conditional_expectation(const ScenarioTree& tree, const TreeProcess& v, std::size_t i) {
    double e = 0.0;
    for (auto c : tree.node(i).children) e += tree.node(c).prob * v[c];
    return e;
}

/// Smallest supermartingale dominating `payoff`:
/// Z = U at leaves, Z = max(U, E[Z_child]) elsewhere.
inline TreeProcess snell_envelope(const ScenarioTree& tree, const TreeProcess& payoff) {
    if (payoff.size() != tree.size()) throw std::invalid_argument("snell_envelope: size mismatch");
    for (double u : payoff) {
        if (!std::isfinite(u)) throw std::invalid_argument("snell_envelope: payoff must be finite");
    }
    TreeProcess z(tree.size());
    for (std::size_t i = tree.size(); i-- > 0;) {
        z[i] = tree.is_leaf(i) ? payoff[i] : std::max(payoff[i], conditional_expectation(tree, z, i));
    }
    return z;
}

/// Stop where the envelope touches the payoff (ties stop).
inline std::vector<bool> optimal_stopping_rule(const ScenarioTree& tree, const TreeProcess& payoff,
                                               const TreeProcess& envelope, double tol = 1e-12) {
    std::vector<bool> stop(tree.size());
    for (std::size_t i = 0; i < tree.size(); ++i) {
        stop[i] = tree.is_leaf(i) || envelope[i] <= payoff[i] + tol;
    }
    return stop;
}

inline std::vector<bool> optimal_stopping_rule(const ScenarioTree& tree, const TreeProcess& payoff) {
    return optimal_stopping_rule(tree, payoff, snell_envelope(tree, payoff));
}

/// E[U_tau] for the first node along each root-to-leaf path marked `stop`.
inline double stopping_value(const ScenarioTree& tree, const TreeProcess& payoff, const std::vector<bool>& stop) {
    double total = 0.0;
    std::vector<double> reach(tree.size(), 0.0);
    reach[0] = 1.0;
    for (std::size_t i = 0; i < tree.size(); ++i) {
        if (reach[i] == 0.0) continue;
        if (stop[i] || tree.is_leaf(i)) {
            total += reach[i] * payoff[i];
            continue;
        }
        for (auto c : tree.node(i).children) reach[c] = reach[i] * tree.node(c).prob;
    }
    return total;
}

[[nodiscard]] inline bool dominates(const TreeProcess& w, const TreeProcess& u, double tol = 1e-12) {
    for (std::size_t i = 0; i < w.size(); ++i)
        if (w[i] < u[i] - tol) return false;
    return true;
}

[[nodiscard]] inline bool is_supermartingale(const ScenarioTree& tree, const TreeProcess& w, double tol = 1e-12) {
    for (std::size_t i = 0; i < tree.size(); ++i) {
        if (tree.is_leaf(i)) continue;
        if (w[i] < conditional_expectation(tree, w, i) - tol) return false;
    }
    return true;
}

struct EnvelopeLimitReport {
    std::vector<double> deviations;  ///< max_node |Z^k - Z| for each k
    bool monotone = true;            ///< deviations nonincreasing in k
    double max_deviation = 0.0;
};

/// Compares the envelopes of a payoff sequence U^k with the envelope of its limit.
inline EnvelopeLimitReport envelope_limit_check(const ScenarioTree& tree, const std::vector<TreeProcess>& sequence,
                                                const TreeProcess& limit) {
    EnvelopeLimitReport r;
    const auto z = snell_envelope(tree, limit);
    for (const auto& u : sequence) {
        const auto zk = snell_envelope(tree, u);
        double dev = 0.0;
        for (std::size_t i = 0; i < zk.size(); ++i) dev = std::max(dev, std::abs(zk[i] - z[i]));
        if (!r.deviations.empty() && dev > r.deviations.back() + 1e-15) r.monotone = false;
        r.deviations.push_back(dev);
        r.max_deviation = std::max(r.max_deviation, dev);
    }
    return r;
}

}  // namespace oswitch
