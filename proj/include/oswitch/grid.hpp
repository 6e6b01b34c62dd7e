#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>

namespace oswitch {

/// Uniform time grid t_i = i * dt on [0, horizon].
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t n_steps) : horizon_(horizon), n_steps_(n_steps) {
        if (!(horizon > 0.0) || !std::isfinite(horizon)) {
            throw std::invalid_argument("TimeGrid: horizon must be positive and finite");
        }
        if (n_steps == 0) {
            throw std::invalid_argument("TimeGrid: n_steps must be positive");
        }
        dt_ = horizon / static_cast<double>(n_steps);
    }

    [[nodiscard]] double horizon() const noexcept { return horizon_; }
    [[nodiscard]] std::size_t n_steps() const noexcept { return n_steps_; }
    [[nodiscard]] double dt() const noexcept { return dt_; }

    [[nodiscard]] double time(std::size_t i) const noexcept {
        return i == n_steps_ ? horizon_ : static_cast<double>(i) * dt_;
    }

    /// Grid index of t if t lies on the grid (relative tolerance 1e-9 of dt).
    [[nodiscard]] std::optional<std::size_t> index_of(double t) const noexcept {
        if (!std::isfinite(t)) return std::nullopt;
        const double r = t / dt_;
        const double k = std::round(r);
        if (k < 0.0 || k > static_cast<double>(n_steps_)) return std::nullopt;
        if (std::abs(r - k) > 1e-9) return std::nullopt;
        return static_cast<std::size_t>(k);
    }

    /// Number of grid steps spanned by a duration; throws unless it is an exact multiple of dt.
    [[nodiscard]] std::size_t steps_for(double duration) const {
        if (duration < 0.0 || !std::isfinite(duration)) {
            throw std::invalid_argument("TimeGrid: duration must be nonnegative");
        }
        const double r = duration / dt_;
        const double k = std::round(r);
        if (std::abs(r - k) > 1e-9) {
            throw std::invalid_argument("TimeGrid: delay is not an integer multiple of the step");
        }
        return static_cast<std::size_t>(k);
    }

private:
    double horizon_;
    std::size_t n_steps_;
    double dt_;
};

}  // namespace oswitch
