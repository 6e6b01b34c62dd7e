#pragma once

// Polynomial state features and least-squares fits for regression Monte Carlo.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "oswitch/sdde.hpp"

namespace oswitch {

/// What a feature map may look at: the current state, the delayed state
/// X(t - delay) and the modes in force now and at t - delay.
struct FeatureInput {
    double t = 0.0;
    std::span<const double> x;
    std::span<const double> y;
    ModeView mode;
};

using RawFeatureFn = std::function<void(const FeatureInput&, std::vector<double>& out)>;

struct FeatureOptions {
    int degree = 2;
    bool cross_terms = true;
    /// Components of x entering the polynomial; empty means all.
    std::vector<std::size_t> current;
    /// Components of X(t - delay); empty means all when the delay is positive.
    std::vector<std::size_t> delayed;
    bool use_delayed = true;
};

/// Polynomial features up to a fixed degree in selected components of
/// (X_t, X_{t-delay}). Index 0 is the constant feature.
class FeatureMap {
public:
    FeatureMap() = default;

    FeatureMap(std::size_t dim, bool has_delay, FeatureOptions opt = {}) : opt_(std::move(opt)) {
        if (opt_.degree < 0) throw std::invalid_argument("FeatureMap: negative degree");
        if (opt_.current.empty())
            for (std::size_t j = 0; j < dim; ++j) opt_.current.push_back(j);
        if (!has_delay || !opt_.use_delayed) {
            opt_.delayed.clear();
        } else if (opt_.delayed.empty()) {
            for (std::size_t j = 0; j < dim; ++j) opt_.delayed.push_back(j);
        }
        for (auto j : opt_.current)
            if (j >= dim) throw std::invalid_argument("FeatureMap: component out of range");
        for (auto j : opt_.delayed)
            if (j >= dim) throw std::invalid_argument("FeatureMap: component out of range");
        const std::size_t nx = opt_.current.size();
        const std::size_t ny = opt_.delayed.size();
        raw_ = [nx, ny, cur = opt_.current, del = opt_.delayed](const FeatureInput& in, std::vector<double>& out) {
            out.resize(nx + ny);
            for (std::size_t j = 0; j < nx; ++j) out[j] = in.x[cur[j]];
            for (std::size_t j = 0; j < ny; ++j) out[nx + j] = in.y[del[j]];
        };
        build(nx + ny);
    }

    /// Polynomial expansion of a user-supplied raw variable extractor.
    /// Variables flagged in `indicator` take values in {0, 1} (or a small
    /// integer range where powers add nothing) and enter each monomial at most once.
    FeatureMap(RawFeatureFn raw, std::size_t raw_dim, int degree, bool cross_terms,
               std::vector<bool> indicator = {})
        : raw_(std::move(raw)), indicator_(std::move(indicator)) {
        opt_.degree = degree;
        opt_.cross_terms = cross_terms;
        indicator_.resize(raw_dim, false);
        build(raw_dim);
    }

    [[nodiscard]] std::size_t size() const noexcept { return monomials_.size(); }
    [[nodiscard]] std::size_t raw_dim() const noexcept { return raw_dim_; }
    [[nodiscard]] int degree() const noexcept { return opt_.degree; }
    [[nodiscard]] bool cross_terms() const noexcept { return opt_.cross_terms; }
    [[nodiscard]] const std::vector<std::vector<std::size_t>>& monomials() const noexcept { return monomials_; }

    /// Writes size() features; `raw` is scratch space.
    void evaluate(const FeatureInput& in, std::vector<double>& raw, std::span<double> out) const {
        raw_(in, raw);
        for (std::size_t f = 0; f < monomials_.size(); ++f) {
            double v = 1.0;
            for (auto j : monomials_[f]) v *= raw[j];
            out[f] = v;
        }
    }

private:
    void build(std::size_t raw_dim) {
        raw_dim_ = raw_dim;
        indicator_.resize(raw_dim, false);
        monomials_.clear();
        monomials_.push_back({});
        std::vector<std::size_t> cur;
        // Nondecreasing index multisets of size 1..degree.
        std::function<void(std::size_t, int)> rec = [&](std::size_t start, int left) {
            for (std::size_t j = start; j < raw_dim; ++j) {
                cur.push_back(j);
                const bool pure = std::all_of(cur.begin(), cur.end(), [&](auto v) { return v == cur.front(); });
                const bool repeated_indicator =
                    indicator_[j] && std::count(cur.begin(), cur.end(), j) > 1;
                if ((opt_.cross_terms || pure) && !repeated_indicator) monomials_.push_back(cur);
                if (left > 1) rec(j, left - 1);
                cur.pop_back();
            }
        };
        if (opt_.degree > 0) rec(0, opt_.degree);
        std::stable_sort(monomials_.begin(), monomials_.end(),
                         [](const auto& a, const auto& b) { return a.size() < b.size(); });
    }

    FeatureOptions opt_;
    RawFeatureFn raw_;
    std::vector<bool> indicator_;
    std::size_t raw_dim_ = 0;
    std::vector<std::vector<std::size_t>> monomials_;
};

/// Least-squares fit on standardized features with an unpenalized intercept.
/// Features with (numerically) zero sample variance are dropped; if the
/// remaining Gram matrix is singular a ridge term of 1e-8 times its trace is
/// added to the non-intercept diagonal.
class LinearFit {
public:
    LinearFit() = default;

    /// `design` is n x p row-major with the constant feature in column 0.
    static LinearFit fit(std::span<const double> design, std::size_t p, std::span<const double> target) {
        const std::size_t n = target.size();
        if (n == 0 || design.size() != n * p || p == 0) throw std::invalid_argument("LinearFit: bad dimensions");
        LinearFit f;
        f.p_ = p;
        f.n_ = n;
        f.mean_.assign(p, 0.0);
        f.scale_.assign(p, 1.0);
        f.active_.clear();
        for (std::size_t j = 1; j < p; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < n; ++r) s += design[r * p + j];
            const double mu = s / static_cast<double>(n);
            double ss = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                const double d = design[r * p + j] - mu;
                ss += d * d;
            }
            const double sd = std::sqrt(ss / static_cast<double>(n));
            f.mean_[j] = mu;
            f.scale_[j] = sd;
            if (sd > 1e-10 * std::max(1.0, std::abs(mu))) f.active_.push_back(j);
        }
        const std::size_t q = 1 + f.active_.size();
        Eigen::MatrixXd z(n, q);
        Eigen::VectorXd yv(n);
        for (std::size_t r = 0; r < n; ++r) {
            z(r, 0) = 1.0;
            for (std::size_t a = 0; a < f.active_.size(); ++a) {
                const auto j = f.active_[a];
                z(r, a + 1) = (design[r * p + j] - f.mean_[j]) / f.scale_[j];
            }
            yv(r) = target[r];
        }
        Eigen::MatrixXd gram = z.transpose() * z;
        const Eigen::VectorXd rhs = z.transpose() * yv;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
        // Eigen's LDLT rcond estimate misses near-zero pivots; test them directly.
        const Eigen::VectorXd piv = ldlt.vectorD().cwiseAbs();
        const bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
                              !(piv.minCoeff() > 1e-12 * piv.maxCoeff());
        if (singular) {
            const double lambda = 1e-8 * gram.trace();
            for (std::size_t a = 1; a < q; ++a) gram(a, a) += lambda;
            ldlt.compute(gram);
            f.ridge_ = true;
        }
        Eigen::VectorXd beta = ldlt.solve(rhs);
        // When only the intercept is active the fit is the sample mean.
        if (q == 1) beta(0) = rhs(0) / static_cast<double>(n);
        f.coef_.assign(beta.data(), beta.data() + q);
        f.lo_ = yv.minCoeff();
        f.hi_ = yv.maxCoeff();
        const Eigen::VectorXd res = yv - z * beta;
        const double dof = n > q ? static_cast<double>(n - q) : static_cast<double>(n);
        f.resid_rms_ = std::sqrt(res.squaredNorm() / dof);
        f.inv_gram_ = ldlt.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q)));
        return f;
    }

    /// Fitted value at a raw feature vector (size p, constant first), clamped
    /// to the range of the training targets: a conditional mean cannot leave it.
    [[nodiscard]] double predict(std::span<const double> phi) const {
        return std::clamp(unclamped(phi), lo_, hi_);
    }

    [[nodiscard]] double unclamped(std::span<const double> phi) const {
        double v = coef_[0];
        for (std::size_t a = 0; a < active_.size(); ++a) {
            const auto j = active_[a];
            v += coef_[a + 1] * (phi[j] - mean_[j]) / scale_[j];
        }
        return v;
    }

    [[nodiscard]] double target_min() const noexcept { return lo_; }
    [[nodiscard]] double target_max() const noexcept { return hi_; }

    /// Standard error of the fitted conditional mean at phi.
    [[nodiscard]] double prediction_se(std::span<const double> phi) const {
        const std::size_t q = coef_.size();
        Eigen::VectorXd zv(static_cast<Eigen::Index>(q));
        zv(0) = 1.0;
        for (std::size_t a = 0; a < active_.size(); ++a) {
            const auto j = active_[a];
            zv(static_cast<Eigen::Index>(a + 1)) = (phi[j] - mean_[j]) / scale_[j];
        }
        const double lev = zv.dot(inv_gram_ * zv);
        return resid_rms_ * std::sqrt(std::max(0.0, lev));
    }

    /// Coefficients in the unstandardized feature basis (length p).
    [[nodiscard]] std::vector<double> raw_coefficients() const {
        std::vector<double> c(p_, 0.0);
        c[0] = coef_.empty() ? 0.0 : coef_[0];
        for (std::size_t a = 0; a < active_.size(); ++a) {
            const auto j = active_[a];
            c[j] = coef_[a + 1] / scale_[j];
            c[0] -= coef_[a + 1] * mean_[j] / scale_[j];
        }
        return c;
    }

    [[nodiscard]] bool ridge() const noexcept { return ridge_; }
    [[nodiscard]] double residual_rms() const noexcept { return resid_rms_; }
    [[nodiscard]] std::size_t samples() const noexcept { return n_; }
    [[nodiscard]] std::size_t active_features() const noexcept { return active_.size() + 1; }
    [[nodiscard]] bool finite() const noexcept {
        for (double c : coef_)
            if (!std::isfinite(c)) return false;
        return true;
    }

private:
    std::size_t p_ = 0;
    std::size_t n_ = 0;
    std::vector<double> mean_, scale_;
    std::vector<std::size_t> active_;
    std::vector<double> coef_;
    Eigen::MatrixXd inv_gram_;
    double resid_rms_ = 0.0;
    double lo_ = 0.0, hi_ = 0.0;
    bool ridge_ = false;
};

}  // namespace oswitch
