#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "stenoflow/network.hpp"
#include "stenoflow/solver.hpp"
#include "stenoflow/util.hpp"

namespace stenoflow::test {

/// Straight test vessel, no config file involved.
inline VesselSegment make_segment(double length = 10.0, double area0 = 1.0, double g0 = 4.0e5,
                                  double dz = 0.1, int id = 1) {
    VesselSegment seg;
    seg.id = id;
    seg.length = length;
    seg.rest_area = area0;
    seg.stiffness = g0;
    const int cells = std::max(1, static_cast<int>(std::lround(length / dz)));
    seg.dz = length / cells;
    seg.node_count = cells + 1;
    return seg;
}

inline FluidProperties blood() {
    return FluidProperties{};
}

inline FluidProperties inviscid() {
    FluidProperties f;
    f.viscosity = 0.0;
    return f;
}

/// Random subcritical state on a segment: area within [0.5, 2] A0 and |v| <= frac * v_c.
template <typename RngT>
std::pair<double, double> random_subcritical(RngT& rng, const VesselSegment& seg,
                                             const FluidProperties& fluid, double frac = 0.5) {
    const double area = seg.rest_area * (0.5 + 1.5 * rng.uniform01());
    const double vc = seg.rest_wave_speed(fluid) *
                      std::sqrt(std::sqrt(area / seg.rest_area));
    const double v = frac * vc * (2.0 * rng.uniform01() - 1.0);
    return {area, area * v};
}

inline std::string desk_config_path() {
    return std::string(STENOFLOW_CONFIG_DIR) + "/desk.net";
}

} // namespace stenoflow::test
