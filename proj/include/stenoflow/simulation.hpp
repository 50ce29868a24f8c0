#pragma once

#include <string>
#include <vector>

#include "stenoflow/coupling.hpp"
#include "stenoflow/network.hpp"
#include "stenoflow/solver.hpp"

namespace stenoflow {

/// Mutable state of one network run. Topology is shared read-only; distinct
/// runs own independent Simulation instances.
class Simulation {
public:
    explicit Simulation(const NetworkTopology& net);

    /// Advance one dt. Throws NumericalError with context on solver failure.
    void step();
    /// Steps until time() >= t_end (integer step count, no partial steps).
    void advance_to(double t_end);

    double time() const { return static_cast<double>(step_count_) * dt_; }
    long step_count() const { return step_count_; }
    double dt() const { return dt_; }

    void set_stenosis_degree(double degree);
    double stenosis_degree() const { return stenosis_degree_; }
    double stenosis_flow() const { return stenosis_.q_s; }

    const NetworkTopology& network() const { return *net_; }
    const SegmentField& field(int segment_index) const { return fields_[segment_index]; }
    const HeartState& heart() const { return heart_; }

    double monitor_pressure_mmhg(int monitor_index) const;
    double monitor_flow(int monitor_index) const;
    /// Nodal pressure in CGS units.
    double node_pressure(int segment_index, int node) const;
    double node_flow(int segment_index, int node) const;

    /// Boundary residual probe for the coupling invariants, evaluated on the
    /// current nodal state at a junction.
    struct JunctionProbe {
        double q_parent, q_child1, q_child2;
        double pt_parent, pt_child1, pt_child2;
    };
    JunctionProbe junction_probe(int junction_index) const;

    /// Versioned binary snapshot of the full mutable state (warm-up cache).
    std::string serialize_state() const;
    void restore_state(const std::string& bytes);

    /// Hash of everything that makes two runs comparable (network + dt).
    uint64_t compatibility_hash() const;

private:
    const NetworkTopology* net_;
    double dt_;
    long step_count_ = 0;

    std::vector<SegmentField> fields_;
    HeartState heart_;
    std::vector<WindkesselState> wk_states_;           // parallel to net_->terminals
    std::vector<BifurcationUnknowns> junction_starts_; // Newton warm starts
    StenosisState stenosis_;
    double stenosis_degree_ = 0.0;
    long beat_steps_ = 0;

    int inlet_index_ = 0;
    int sten_prox_index_ = -1, sten_dist_index_ = -1;
    std::vector<int> terminal_index_;       // segment index per terminal
    std::vector<std::array<int, 3>> junction_index_; // parent/child segment indices
};

} // namespace stenoflow
