#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace oswitch {

/// Zero-based operating mode index.
using ModeIndex = std::size_t;

/// The finite set of operating modes {0, ..., count-1} and the mode in force at t = 0.
struct ModeSet {
    std::size_t count = 2;
    ModeIndex initial = 0;

    ModeSet() = default;
    ModeSet(std::size_t m, ModeIndex b0) : count(m), initial(b0) {
        if (m < 2) throw std::invalid_argument("ModeSet: at least two modes are required");
        if (b0 >= m) throw std::invalid_argument("ModeSet: initial mode out of range");
    }

    [[nodiscard]] bool contains(ModeIndex b) const noexcept { return b < count; }
};

/// One intervention: at `time`, switch into `target`.
struct Switch {
    double time = 0.0;
    ModeIndex target = 0;

    friend bool operator==(const Switch&, const Switch&) = default;
};

/// A finite switching control u = (tau_1..tau_N; beta_1..beta_N).
struct SwitchingControl {
    std::vector<Switch> switches;

    [[nodiscard]] bool empty() const noexcept { return switches.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return switches.size(); }

    friend bool operator==(const SwitchingControl&, const SwitchingControl&) = default;
};

}  // namespace oswitch
