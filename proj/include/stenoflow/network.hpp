#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stenoflow/util.hpp"

namespace stenoflow {

struct FluidProperties {
    double density = 1.06;    // g/cm^3
    double viscosity = 0.045; // poise

    /// Momentum friction parameter K_r = 22*pi*eta/rho (cm^2/s).
    double friction() const { return 22.0 * kPi * viscosity / density; }
    static constexpr double poisson_ratio = 0.5;
};

/// Geometry and elasticity of one 1-D vessel plus its spatial grid.
/// Grid nodes sit at z_k = k*dz, k = 0..node_count-1, with the last node at z = length.
struct VesselSegment {
    int id = 0;
    std::string name;
    double length = 0;    // cm
    double rest_area = 0; // A0, cm^2
    double stiffness = 0; // G0, dyn/cm^2
    double dz = 0;        // cm
    int node_count = 0;   // N_h + 1

    /// Pulse wave speed at rest, sqrt(G0/(2*rho)).
    double rest_wave_speed(const FluidProperties& fluid) const;
    /// Characteristic impedance Z = rho * c(A0) / A0.
    double char_impedance(const FluidProperties& fluid) const;
};

/// Left-ventricle parameters, stored in CGS (converted from mmHg-based config units at load).
struct HeartParams {
    double dead_volume = 0;      // V0, cm^3
    double max_volume = 0;       // V_max, cm^3
    double period = 0;           // T, s
    double contraction_time = 0; // T_vcp, s
    double relaxation_time = 0;  // T_vrp, s
    double e_max = 0;            // dyn/cm^2 per cm^3
    double e_min = 0;            // dyn/cm^2 per cm^3
    double resistance = 0;       // R, dyn*s/cm^5
    double separation = 0;       // B, dyn*s^2/cm^8
    double inductance = 0;       // L, dyn*s^2/cm^5
    double s_coeff = 5.0e-4;     // S(t) = s_coeff * P_LV(t), s/cm^3
};

struct WindkesselParams {
    double r1 = 0; // dyn*s/cm^5, equals the characteristic impedance of the attached segment
    double r2 = 0; // dyn*s/cm^5
    double c = 0;  // cm^5/dyn
    double pv = 0; // venous pressure, dyn/cm^2
};

struct StenosisPlacement {
    int proximal = 0;     // segment id ending at the stenosis
    int distal = 0;       // segment id starting at the stenosis
    double length = 0;    // l_s, cm
    double rest_area = 0; // A0s, cm^2 (shared with the adjacent segments)
    double degree = 0;    // R_s in [0,1]
};

struct Junction {
    int parent = 0;
    int child1 = 0;
    int child2 = 0;
};

struct Terminal {
    int segment = 0;
    WindkesselParams wk;
};

struct Monitor {
    int segment = 0;
    int node = 0;
    std::string label; // "<segment>:<node>" unless named in the config
};

struct SolverSettings {
    double dt = 2.5e-3;     // s
    double target_dz = 0.2; // cm; per-segment dz is shrunk so the grid fits exactly
};

/// Snapshot protocol timing. q = sample_rate * (final_time - record_start).
struct SnapshotProtocol {
    double warmup_end = 20.0;  // T1
    double final_time = 30.0;  // T2
    double record_start = 29.0;
    int sample_rate = 400;     // samples per second
    double healthy_degree = 1e-6;

    int q() const;
};

class NetworkTopology {
public:
    std::vector<VesselSegment> segments;
    std::vector<Junction> junctions;
    std::vector<Terminal> terminals;
    std::optional<StenosisPlacement> stenosis;
    std::vector<Monitor> monitors;
    int inlet_segment = 0;
    HeartParams heart;
    FluidProperties fluid;
    SolverSettings solver;
    SnapshotProtocol protocol;

    int segment_index(int id) const;
    const VesselSegment& segment(int id) const;

    /// Deterministic serialization of everything that affects simulation results.
    std::string canonical_text() const;
    uint64_t content_hash() const;
};

/// Parse and validate a network from JSON config text.
/// Throws ConfigError with line/field context on parse errors and with the
/// violated invariant on validation errors.
NetworkTopology load_network(const std::string& config_text);
NetworkTopology load_network_file(const std::string& path);

/// p = G0 * (sqrt(A/A0) - 1). Domain error for A <= 0.
double pressure_from_area(double area, const VesselSegment& seg);
/// A = A0 * (p/G0 + 1)^2. Domain error for p <= -G0 (collapsed vessel).
double area_from_pressure(double pressure, const VesselSegment& seg);

} // namespace stenoflow
