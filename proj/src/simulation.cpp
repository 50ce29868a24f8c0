#include "stenoflow/simulation.hpp"
#include "stenoflow/errors.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace stenoflow {

Simulation::Simulation(const NetworkTopology& net) : net_(&net), dt_(net.solver.dt) {
    for (const auto& seg : net.segments) fields_.push_back(SegmentField::rest(seg));
    heart_ = HeartState::initial(net.heart);
    wk_states_.assign(net.terminals.size(), WindkesselState{});
    junction_starts_.assign(net.junctions.size(), BifurcationUnknowns{});
    inlet_index_ = net.segment_index(net.inlet_segment);
    for (const auto& t : net.terminals) terminal_index_.push_back(net.segment_index(t.segment));
    for (const auto& j : net.junctions)
        junction_index_.push_back({net.segment_index(j.parent), net.segment_index(j.child1),
                                   net.segment_index(j.child2)});
    if (net.stenosis) {
        sten_prox_index_ = net.segment_index(net.stenosis->proximal);
        sten_dist_index_ = net.segment_index(net.stenosis->distal);
        stenosis_degree_ = net.stenosis->degree;
    }
    beat_steps_ = std::lround(net.heart.period / dt_);
}

void Simulation::set_stenosis_degree(double degree) {
    if (!net_->stenosis)
        throw ConfigError("network has no stenosis placement");
    if (degree < 0 || degree > 1)
        throw ConfigError("stenosis degree must lie in [0,1], got " + format_double(degree));
    stenosis_degree_ = degree;
}

double Simulation::node_pressure(int segment_index, int node) const {
    return pressure_from_area(fields_[segment_index].area[node], net_->segments[segment_index]);
}

double Simulation::node_flow(int segment_index, int node) const {
    return fields_[segment_index].flow[node];
}

double Simulation::monitor_pressure_mmhg(int monitor_index) const {
    const Monitor& m = net_->monitors[monitor_index];
    return dyn_to_mmhg(node_pressure(net_->segment_index(m.segment), m.node));
}

double Simulation::monitor_flow(int monitor_index) const {
    const Monitor& m = net_->monitors[monitor_index];
    return node_flow(net_->segment_index(m.segment), m.node);
}

void Simulation::step() {
    const double t_now = time();
    const FluidProperties& fluid = net_->fluid;

    // outgoing characteristics extrapolated to t_{n+1} at every segment end
    std::vector<double> out_w1(fields_.size()), out_w2(fields_.size());
    for (std::size_t i = 0; i < fields_.size(); ++i) {
        const VesselSegment& seg = net_->segments[i];
        out_w1[i] = extrapolate_outgoing_w1(fields_[i], dt_, seg, fluid);
        out_w2[i] = extrapolate_outgoing_w2(fields_[i], dt_, seg, fluid);
    }

    // ingoing characteristics from the attached 0-D models
    std::vector<BoundaryValues> bv(fields_.size());

    // heart inlet
    {
        const VesselSegment& root = net_->segments[inlet_index_];
        const double p_root = node_pressure(inlet_index_, 0);
        const bool beat_reset = beat_steps_ > 0 && step_count_ % beat_steps_ == 0;
        const HeartStepResult hr = heart_step(heart_, p_root, out_w1[inlet_index_], t_now, dt_,
                                              beat_reset, net_->heart, root, fluid);
        heart_ = hr.state;
        bv[inlet_index_].inlet_w2 = hr.inlet_w2;
    }

    // bifurcations
    for (std::size_t j = 0; j < net_->junctions.size(); ++j) {
        const auto [pi, c1, c2] = junction_index_[j];
        const BifurcationUnknowns sol = bifurcation_solve(
            {out_w2[pi], out_w1[c1], out_w1[c2]}, net_->segments[pi], net_->segments[c1],
            net_->segments[c2], fluid, junction_starts_[j], net_->junctions[j].parent);
        junction_starts_[j] = sol;
        bv[pi].outlet_w1 = sol.parent_w1;
        bv[c1].inlet_w2 = sol.child1_w2;
        bv[c2].inlet_w2 = sol.child2_w2;
    }

    // windkessel terminals
    for (std::size_t k = 0; k < net_->terminals.size(); ++k) {
        const int si = terminal_index_[k];
        const VesselSegment& seg = net_->segments[si];
        const double w1 = windkessel_solve(out_w2[si], wk_states_[k], dt_, net_->terminals[k].wk,
                                           seg, fluid, net_->terminals[k].segment);
        bv[si].outlet_w1 = w1;
        const auto [a, q] = from_characteristics({w1, out_w2[si]}, seg, fluid);
        wk_states_[k] = {pressure_from_area(a, seg), q};
    }

    // stenosis junction
    if (sten_prox_index_ >= 0) {
        const VesselSegment& prox = net_->segments[sten_prox_index_];
        const VesselSegment& dist = net_->segments[sten_dist_index_];
        const StenosisStepResult sr =
            stenosis_step(stenosis_, out_w2[sten_prox_index_], out_w1[sten_dist_index_], dt_,
                          *net_->stenosis, stenosis_degree_, prox, dist, fluid, t_now);
        stenosis_ = sr.state;
        bv[sten_prox_index_].outlet_w1 = sr.prox_w1;
        bv[sten_dist_index_].inlet_w2 = sr.dist_w2;
    }

    // 1-D interior update
    for (std::size_t i = 0; i < fields_.size(); ++i)
        nmc_step(fields_[i], dt_, bv[i], net_->segments[i], fluid, t_now);

    ++step_count_;
}

void Simulation::advance_to(double t_end) {
    while (time() < t_end - 0.5 * dt_) step();
}

Simulation::JunctionProbe Simulation::junction_probe(int junction_index) const {
    const auto [pi, c1, c2] = junction_index_[junction_index];
    const FluidProperties& fluid = net_->fluid;
    JunctionProbe pr{};
    const SegmentField& fp = fields_[pi];
    const int last = net_->segments[pi].node_count - 1;
    pr.q_parent = fp.flow[last];
    pr.q_child1 = fields_[c1].flow[0];
    pr.q_child2 = fields_[c2].flow[0];
    pr.pt_parent = total_pressure({fp.w1[last], fp.w2[last]}, net_->segments[pi], fluid);
    pr.pt_child1 =
        total_pressure({fields_[c1].w1[0], fields_[c1].w2[0]}, net_->segments[c1], fluid);
    pr.pt_child2 =
        total_pressure({fields_[c2].w1[0], fields_[c2].w2[0]}, net_->segments[c2], fluid);
    return pr;
}

namespace {

constexpr char kStateMagic[8] = {'S', 'F', 'S', 'T', 'A', 'T', 'E', '1'};

void put_bytes(std::string& out, const void* p, std::size_t n) {
    out.append(static_cast<const char*>(p), n);
}
template <typename T>
void put(std::string& out, T v) {
    put_bytes(out, &v, sizeof v);
}

struct Reader {
    const std::string& s;
    std::size_t pos = 0;
    void raw(void* p, std::size_t n) {
        if (pos + n > s.size()) throw MissingArtifactError("state snapshot truncated");
        std::memcpy(p, s.data() + pos, n);
        pos += n;
    }
    template <typename T>
    T get() {
        T v;
        raw(&v, sizeof v);
        return v;
    }
};

} // namespace

uint64_t Simulation::compatibility_hash() const {
    return fnv1a(format_double(dt_), net_->content_hash());
}

std::string Simulation::serialize_state() const {
    std::string out;
    put_bytes(out, kStateMagic, sizeof kStateMagic);
    put(out, compatibility_hash());
    put(out, step_count_);
    put(out, heart_.volume);
    put(out, heart_.q_lv);
    put(out, heart_.p_lv);
    put(out, static_cast<uint8_t>(heart_.systole ? 1 : 0));
    put(out, stenosis_.q_s);
    put(out, stenosis_degree_);
    put(out, static_cast<uint64_t>(wk_states_.size()));
    for (const auto& w : wk_states_) {
        put(out, w.pressure);
        put(out, w.flow);
    }
    put(out, static_cast<uint64_t>(junction_starts_.size()));
    for (const auto& j : junction_starts_) {
        put(out, j.parent_w1);
        put(out, j.child1_w2);
        put(out, j.child2_w2);
    }
    put(out, static_cast<uint64_t>(fields_.size()));
    for (const auto& f : fields_) {
        put(out, static_cast<uint64_t>(f.area.size()));
        for (double a : f.area) put(out, a);
        for (double q : f.flow) put(out, q);
    }
    return out;
}

void Simulation::restore_state(const std::string& bytes) {
    Reader rd{bytes};
    char magic[8];
    rd.raw(magic, sizeof magic);
    if (std::memcmp(magic, kStateMagic, sizeof magic) != 0)
        throw MissingArtifactError("state snapshot has wrong magic/version");
    const auto h = rd.get<uint64_t>();
    if (h != compatibility_hash())
        throw MissingArtifactError("state snapshot does not match this network/solver setup");
    step_count_ = rd.get<long>();
    heart_.volume = rd.get<double>();
    heart_.q_lv = rd.get<double>();
    heart_.p_lv = rd.get<double>();
    heart_.systole = rd.get<uint8_t>() != 0;
    stenosis_.q_s = rd.get<double>();
    stenosis_degree_ = rd.get<double>();
    const auto nw = rd.get<uint64_t>();
    if (nw != wk_states_.size()) throw MissingArtifactError("state snapshot terminal count mismatch");
    for (auto& w : wk_states_) {
        w.pressure = rd.get<double>();
        w.flow = rd.get<double>();
    }
    const auto nj = rd.get<uint64_t>();
    if (nj != junction_starts_.size())
        throw MissingArtifactError("state snapshot junction count mismatch");
    for (auto& j : junction_starts_) {
        j.parent_w1 = rd.get<double>();
        j.child1_w2 = rd.get<double>();
        j.child2_w2 = rd.get<double>();
    }
    const auto ns = rd.get<uint64_t>();
    if (ns != fields_.size()) throw MissingArtifactError("state snapshot segment count mismatch");
    for (std::size_t i = 0; i < fields_.size(); ++i) {
        auto& f = fields_[i];
        const auto nn = rd.get<uint64_t>();
        if (nn != f.area.size()) throw MissingArtifactError("state snapshot grid mismatch");
        for (double& a : f.area) a = rd.get<double>();
        for (double& q : f.flow) q = rd.get<double>();
        f.sync_characteristics(net_->segments[i], net_->fluid);
    }
}

} // namespace stenoflow
