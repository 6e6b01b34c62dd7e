#pragma once

// CSV tables: simulated paths, fitted surfaces and water-value curves.
// Numbers are written with 17 significant digits so files round-trip and
// compare byte for byte across runs.

#include <cstdio>
#include <ostream>
#include <string>

#include "oswitch/hydro.hpp"
#include "oswitch/sdde.hpp"
#include "oswitch/solver.hpp"

namespace oswitch::io {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// One row per grid time: time, mode, state components.
inline void write_path_csv(std::ostream& os, const Path& path, const TimeGrid& grid) {
    os << "time,mode";
    for (std::size_t j = 0; j < path.dim(); ++j) os << ",x" << j + 1;
    os << '\n';
    for (std::size_t i = 0; i <= grid.n_steps(); ++i) {
        const auto ii = static_cast<std::ptrdiff_t>(i);
        os << num(grid.time(i)) << ',' << path.mode(ii);
        for (double v : path.state(ii)) os << ',' << num(v);
        os << '\n';
    }
}

/// Regression coefficients in the raw feature basis, one row per (i, mode, k).
inline void write_surface_csv(std::ostream& os, const ValueSurface& s) {
    const auto& g = s.grid();
    const std::size_t m = s.problem().modes.count;
    os << "i,time,mode,k,samples,residual_rms";
    for (std::size_t f = 0; f < s.features().size(); ++f) os << ",c" << f;
    os << '\n';
    for (std::size_t k = 0; k <= s.k_top(); ++k)
        for (std::size_t i = 0; i < g.n_steps(); ++i)
            for (ModeIndex b = 0; b < m; ++b) {
                const auto& fit = s.fit(k, i, b);
                os << i << ',' << num(g.time(i)) << ',' << b << ',' << k << ',' << fit.samples() << ','
                   << num(fit.residual_rms());
                for (double c : fit.raw_coefficients()) os << ',' << num(c);
                os << '\n';
            }
}

inline void write_water_value_csv(std::ostream& os, const WaterValueCurve& c) {
    os << "reservoir,level,value,se\n";
    for (const auto& p : c.reservoir1) os << "1," << num(p.level) << ',' << num(p.value) << ',' << num(p.se) << '\n';
    for (const auto& p : c.reservoir2) os << "2," << num(p.level) << ',' << num(p.value) << ',' << num(p.se) << '\n';
}

inline void write_marginal_csv(std::ostream& os, const WaterValueCurve& c) {
    os << "level,marginal1,marginal2\n";
    for (std::size_t j = 0; j < c.marginal_levels.size(); ++j) {
        os << num(c.marginal_levels[j]) << ',' << num(c.marginal1[j]) << ',' << num(c.marginal2[j]) << '\n';
    }
}

}  // namespace oswitch::io
