#pragma once

#include <utility>
#include <vector>

#include "stenoflow/network.hpp"

namespace stenoflow {

/// Characteristic variables: w1 travels backward, w2 forward. Both vanish at rest.
struct CharacteristicPair {
    double w1 = 0;
    double w2 = 0;
};

/// Nodal (A, Q) arrays of one segment at the current time level.
/// The characteristic fields are kept in sync with (area, flow).
struct SegmentField {
    std::vector<double> area; // cm^2
    std::vector<double> flow; // cm^3/s
    std::vector<double> w1;
    std::vector<double> w2;

    static SegmentField rest(const VesselSegment& seg);
    void sync_characteristics(const VesselSegment& seg, const FluidProperties& fluid);
};

/// Ingoing characteristics at t_{n+1}, supplied by the boundary couplings:
/// w2 enters at z = 0, w1 enters at z = l.
struct BoundaryValues {
    double inlet_w2 = 0;
    double outlet_w1 = 0;
};

double wave_speed(double area, const VesselSegment& seg, const FluidProperties& fluid);

/// (lambda1, lambda2) = (v - v_c, v + v_c). Throws on supercritical flow (|v| >= 0.99 v_c).
std::pair<double, double> eigenvalues(double area, double flow, const VesselSegment& seg,
                                      const FluidProperties& fluid);

CharacteristicPair to_characteristics(double area, double flow, const VesselSegment& seg,
                                      const FluidProperties& fluid);

/// Inverse map; throws when the quartic base 1 + (w1+w2)/(8 c0) is not positive.
std::pair<double, double> from_characteristics(const CharacteristicPair& w, const VesselSegment& seg,
                                               const FluidProperties& fluid);

/// Feet of the two linearized characteristics through (z_k, t_{n+1}), traced back to t_n.
/// One fixed-point sweep: lambda at the node, then re-evaluated once at the interpolated foot.
/// Feet may fall outside [0, l].
std::pair<double, double> trace_feet(int node, const SegmentField& field, double dt,
                                     const VesselSegment& seg, const FluidProperties& fluid);

/// Characteristic-space source L*S: (dW1/dt, dW2/dt) = (K_r v / A, -K_r v / A).
CharacteristicPair source_term(const CharacteristicPair& w, const VesselSegment& seg,
                               const FluidProperties& fluid);

/// One NMC step of a single segment, in place. Boundary values are the ingoing
/// characteristics at t_{n+1}; the previous ingoing values at t_n are read from the field.
/// time_now is used only for error reporting.
void nmc_step(SegmentField& field, double dt, const BoundaryValues& bv, const VesselSegment& seg,
              const FluidProperties& fluid, double time_now);

/// Outgoing characteristics extrapolated to t_{n+1} along their feet (used by the couplings).
double extrapolate_outgoing_w1(const SegmentField& field, double dt, const VesselSegment& seg,
                               const FluidProperties& fluid); // at z = 0
double extrapolate_outgoing_w2(const SegmentField& field, double dt, const VesselSegment& seg,
                               const FluidProperties& fluid); // at z = l

} // namespace stenoflow
