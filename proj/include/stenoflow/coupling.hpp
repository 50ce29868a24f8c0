#pragma once

#include <array>

#include "stenoflow/network.hpp"
#include "stenoflow/solver.hpp"

namespace stenoflow {

// ---------------------------------------------------------------------------
// Left-ventricle inlet

struct HeartState {
    double volume = 0;  // cm^3
    double q_lv = 0;    // cm^3/s
    double p_lv = 0;    // dyn/cm^2 (derived, stored for inspection)
    bool systole = false;

    static HeartState initial(const HeartParams& hp);
};

/// Time-varying elastance E(t) in dyn/cm^2 per cm^3; t is taken modulo the period.
double elastance(double t, const HeartParams& hp);

/// Ventricular pressure E(t)(V - V0) + S(t) Q_LV with S = s_coeff * P_LV; the S
/// factor uses the previous step's ventricle pressure (explicit first order).
double ventricle_pressure(double t, double volume, double q_lv, double p_lv_prev,
                          const HeartParams& hp);

struct HeartStepResult {
    HeartState state;
    double inlet_w2; // ingoing characteristic at the aorta root at t_{n+1}
};

/// Explicit first-order update of (V, Q_LV) over [t, t+dt] and the matching ingoing W2.
/// beat_reset resets V to V_max (start of a heart cycle). p_root is the current aortic
/// root pressure; outgoing_w1 the extrapolated W1(0, t_{n+1}).
HeartStepResult heart_step(const HeartState& hs, double p_root, double outgoing_w1, double t,
                           double dt, bool beat_reset, const HeartParams& hp,
                           const VesselSegment& root_seg, const FluidProperties& fluid);

// ---------------------------------------------------------------------------
// Bifurcation

struct BifurcationUnknowns {
    double parent_w1 = 0; // ingoing at parent outlet
    double child1_w2 = 0; // ingoing at child inlets
    double child2_w2 = 0;
};

/// Total pressure rho/2 v^2 + p(A) from a characteristic pair.
double total_pressure(const CharacteristicPair& w, const VesselSegment& seg,
                      const FluidProperties& fluid);

/// Newton solve of mass conservation + total-pressure continuity for the three
/// ingoing characteristics. `outgoing` = (parent W2 at z=l, child1 W1 at z=0,
/// child2 W1 at z=0), extrapolated to t_{n+1}. `start` seeds the iteration
/// (previous step's solution).
BifurcationUnknowns bifurcation_solve(const std::array<double, 3>& outgoing,
                                      const VesselSegment& parent, const VesselSegment& child1,
                                      const VesselSegment& child2, const FluidProperties& fluid,
                                      const BifurcationUnknowns& start, int junction_id);

// ---------------------------------------------------------------------------
// Windkessel terminal

struct WindkesselState {
    double pressure = 0; // outlet p at t_n, dyn/cm^2
    double flow = 0;     // outlet Q at t_n, cm^3/s
};

/// Solves the three-element Windkessel ODE, discretized first order in the outlet
/// state, together with the tube law for the ingoing W1 at z = l.
double windkessel_solve(double outgoing_w2, const WindkesselState& prev, double dt,
                        const WindkesselParams& wp, const VesselSegment& seg,
                        const FluidProperties& fluid, int terminal_id);

// ---------------------------------------------------------------------------
// Stenosis junction

struct StenosisCoefficients {
    double narrowed_area = 0; // A_s = (1 - R_s) * A0s
    double diameter = 0;      // D_s = 2 sqrt(A_s / pi)
    double k_v = 0;
    static constexpr double k_t = 1.52;
    static constexpr double k_u = 1.2;
};

/// Empirical coefficients for a given degree; degree = 1 yields the occluded limit.
StenosisCoefficients stenosis_coefficients(const StenosisPlacement& sp, double degree);

struct StenosisState {
    double q_s = 0; // cm^3/s
};

struct StenosisStepResult {
    StenosisState state;
    double prox_w1; // ingoing at proximal outlet
    double dist_w2; // ingoing at distal inlet
};

/// First-order residual of the stenosis ODE over one step:
/// inertia (q_new - q_old)/dt - dp + visc q_new + turb q_new |q_new|, with
/// dp = p_prox(l) - p_dist(0). Zero at the discrete solution.
double stenosis_ode_residual(double q_new, double q_old, double dp, double dt,
                             const StenosisPlacement& sp, double degree,
                             const FluidProperties& fluid);

/// First-order update of Q_s coupled simultaneously with the two 1-D sides:
/// a 3-unknown Newton solve of (flow imposition on both sides, stenosis ODE).
/// degree = 1 forces Q_s = 0 (full reflection of both ingoing characteristics).
StenosisStepResult stenosis_step(const StenosisState& ss, double w2_prox, double w1_dist,
                                 double dt, const StenosisPlacement& sp, double degree,
                                 const VesselSegment& prox, const VesselSegment& dist,
                                 const FluidProperties& fluid, double time_now);

// ---------------------------------------------------------------------------
// Shared scalar boundary solve

/// Finds the ingoing characteristic that imposes flow rate `target` at a segment end.
/// `outgoing` is the known characteristic; `ingoing_is_w1` selects the end
/// (true: outlet z=l, unknown W1; false: inlet z=0, unknown W2).
double solve_flow_boundary(double target, double outgoing, bool ingoing_is_w1,
                           const VesselSegment& seg, const FluidProperties& fluid,
                           const char* who);

} // namespace stenoflow
