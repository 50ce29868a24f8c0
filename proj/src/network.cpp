#include "stenoflow/network.hpp"
#include "stenoflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace stenoflow {

using nlohmann::json;

double VesselSegment::rest_wave_speed(const FluidProperties& fluid) const {
    return std::sqrt(stiffness / (2.0 * fluid.density));
}

double VesselSegment::char_impedance(const FluidProperties& fluid) const {
    return fluid.density * rest_wave_speed(fluid) / rest_area;
}

int SnapshotProtocol::q() const {
    return static_cast<int>(std::lround(sample_rate * (final_time - record_start)));
}

double pressure_from_area(double area, const VesselSegment& seg) {
    if (!(area > 0))
        throw NumericalError("pressure_from_area: section area must be positive (segment " +
                             std::to_string(seg.id) + ")");
    return seg.stiffness * (std::sqrt(area / seg.rest_area) - 1.0);
}

double area_from_pressure(double pressure, const VesselSegment& seg) {
    if (!(pressure > -seg.stiffness))
        throw NumericalError("area_from_pressure: pressure at or below -G0, vessel collapsed (segment " +
                             std::to_string(seg.id) + ")");
    const double r = pressure / seg.stiffness + 1.0;
    return seg.rest_area * r * r;
}

int NetworkTopology::segment_index(int id) const {
    for (std::size_t i = 0; i < segments.size(); ++i)
        if (segments[i].id == id) return static_cast<int>(i);
    throw ConfigError("unknown segment id " + std::to_string(id));
}

const VesselSegment& NetworkTopology::segment(int id) const {
    return segments[static_cast<std::size_t>(segment_index(id))];
}

namespace {

[[noreturn]] void fail(const std::string& what) { throw ConfigError("network config: " + what); }

const json& require(const json& obj, const char* key, const std::string& ctx) {
    auto it = obj.find(key);
    if (it == obj.end()) fail("missing field '" + std::string(key) + "' in " + ctx);
    return *it;
}

double num(const json& obj, const char* key, const std::string& ctx) {
    const json& v = require(obj, key, ctx);
    if (!v.is_number()) fail("field '" + std::string(key) + "' in " + ctx + " must be a number");
    return v.get<double>();
}

double num_or(const json& obj, const char* key, double dflt) {
    auto it = obj.find(key);
    if (it == obj.end()) return dflt;
    if (!it->is_number()) fail("field '" + std::string(key) + "' must be a number");
    return it->get<double>();
}

int integer(const json& obj, const char* key, const std::string& ctx) {
    const json& v = require(obj, key, ctx);
    if (!v.is_number_integer()) fail("field '" + std::string(key) + "' in " + ctx + " must be an integer");
    return v.get<int>();
}

void check_positive(double v, const std::string& what) {
    if (!(v > 0)) fail("invariant violated: " + what + " must be > 0 (got " + format_double(v) + ")");
}

bool near_integer(double x, double tol = 1e-6) {
    return std::abs(x - std::round(x)) < tol;
}

HeartParams parse_heart(const json& h) {
    HeartParams p;
    const std::string ctx = "inlet.heart";
    p.dead_volume = num(h, "v0", ctx);
    p.max_volume = num(h, "v_max", ctx);
    p.period = num(h, "period", ctx);
    p.contraction_time = num(h, "t_vcp", ctx);
    p.relaxation_time = num(h, "t_vrp", ctx);
    // elastances/resistances come in the clinical mmHg-based units of the config schema
    p.e_max = mmhg_to_dyn(num(h, "e_max", ctx));
    p.e_min = mmhg_to_dyn(num(h, "e_min", ctx));
    p.resistance = mmhg_to_dyn(num(h, "resistance", ctx));
    p.separation = mmhg_to_dyn(num(h, "separation", ctx));
    p.inductance = mmhg_to_dyn(num(h, "inductance", ctx));
    p.s_coeff = num_or(h, "s_coeff", 5.0e-4);

    check_positive(p.period, "heart period");
    check_positive(p.contraction_time, "heart t_vcp");
    check_positive(p.relaxation_time, "heart t_vrp");
    check_positive(p.e_max, "heart e_max");
    check_positive(p.e_min, "heart e_min");
    check_positive(p.resistance, "heart resistance");
    check_positive(p.separation, "heart separation");
    check_positive(p.inductance, "heart inductance");
    if (p.contraction_time + p.relaxation_time > p.period + 1e-12)
        fail("invariant violated: t_vcp + t_vrp must be <= heart period");
    if (!(p.max_volume > p.dead_volume))
        fail("invariant violated: heart v_max must exceed v0");
    return p;
}

} // namespace

NetworkTopology load_network(const std::string& config_text) {
    json root;
    try {
        root = json::parse(config_text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("network config parse error: ") + e.what());
    }
    if (!root.is_object()) fail("top level must be an object");
    const int version = root.contains("version") ? integer(root, "version", "top level") : 1;
    if (version != 1) fail("unsupported config version " + std::to_string(version));

    NetworkTopology net;

    if (root.contains("fluid")) {
        const json& f = root["fluid"];
        net.fluid.density = num_or(f, "density", net.fluid.density);
        net.fluid.viscosity = num_or(f, "viscosity", net.fluid.viscosity);
    }
    check_positive(net.fluid.density, "fluid density");
    if (net.fluid.viscosity < 0) fail("invariant violated: fluid viscosity must be >= 0");

    if (root.contains("solver")) {
        const json& s = root["solver"];
        net.solver.dt = num_or(s, "dt", net.solver.dt);
        net.solver.target_dz = num_or(s, "target_dz", net.solver.target_dz);
    }
    check_positive(net.solver.dt, "solver dt");
    check_positive(net.solver.target_dz, "solver target_dz");

    const json& vessels = require(root, "vessels", "top level");
    if (!vessels.is_array() || vessels.empty()) fail("'vessels' must be a non-empty array");
    std::set<int> ids;
    for (const json& v : vessels) {
        VesselSegment seg;
        seg.id = integer(v, "id", "vessel");
        const std::string ctx = "vessel " + std::to_string(seg.id);
        if (!ids.insert(seg.id).second) fail("duplicate vessel id " + std::to_string(seg.id));
        if (v.contains("name")) seg.name = v["name"].get<std::string>();
        seg.length = num(v, "length", ctx);
        seg.rest_area = num(v, "area0", ctx);
        const bool has_g0 = v.contains("g0"), has_beta = v.contains("beta");
        if (has_g0 == has_beta) fail(ctx + ": exactly one of 'g0' or 'beta' is required");
        check_positive(seg.length, ctx + " length");
        check_positive(seg.rest_area, ctx + " area0");
        seg.stiffness = has_g0 ? num(v, "g0", ctx)
                               : num(v, "beta", ctx) * std::sqrt(seg.rest_area);
        check_positive(seg.stiffness, ctx + " stiffness");

        // dz shrinks from the requested target so the grid fits the length exactly
        const int cells = std::max(1, static_cast<int>(std::ceil(seg.length / net.solver.target_dz - 1e-9)));
        seg.dz = seg.length / cells;
        seg.node_count = cells + 1;
        net.segments.push_back(seg);
    }

    const json& inlet = require(root, "inlet", "top level");
    net.inlet_segment = integer(inlet, "vessel", "inlet");
    if (!ids.count(net.inlet_segment)) fail("inlet references missing vessel id " + std::to_string(net.inlet_segment));
    net.heart = parse_heart(require(inlet, "heart", "inlet"));

    if (root.contains("junctions")) {
        for (const json& j : root["junctions"]) {
            Junction jn;
            jn.parent = integer(j, "parent", "junction");
            const json& ch = require(j, "children", "junction");
            if (!ch.is_array() || ch.size() != 2) fail("junction 'children' must list exactly two vessel ids");
            jn.child1 = ch[0].get<int>();
            jn.child2 = ch[1].get<int>();
            for (int id : {jn.parent, jn.child1, jn.child2})
                if (!ids.count(id)) fail("junction references missing vessel id " + std::to_string(id));
            if (jn.child1 == jn.child2) fail("junction children must be distinct");
            net.junctions.push_back(jn);
        }
    }

    if (root.contains("stenosis") && !root["stenosis"].is_null()) {
        const json& s = root["stenosis"];
        StenosisPlacement sp;
        sp.proximal = integer(s, "proximal", "stenosis");
        sp.distal = integer(s, "distal", "stenosis");
        for (int id : {sp.proximal, sp.distal})
            if (!ids.count(id)) fail("stenosis references missing vessel id " + std::to_string(id));
        sp.length = num(s, "length", "stenosis");
        check_positive(sp.length, "stenosis length");
        const VesselSegment* prox = nullptr;
        const VesselSegment* dist = nullptr;
        for (const auto& seg : net.segments) {
            if (seg.id == sp.proximal) prox = &seg;
            if (seg.id == sp.distal) dist = &seg;
        }
        if (std::abs(prox->rest_area - dist->rest_area) > 1e-12 * prox->rest_area ||
            std::abs(prox->stiffness - dist->stiffness) > 1e-12 * prox->stiffness)
            fail("invariant violated: stenosis proximal/distal segments must share area0 and stiffness");
        sp.rest_area = num_or(s, "area0", prox->rest_area);
        check_positive(sp.rest_area, "stenosis area0");
        sp.degree = num_or(s, "degree", 0.0);
        if (sp.degree < 0 || sp.degree > 1)
            fail("invariant violated: stenosis degree must lie in [0,1]");
        net.stenosis = sp;
    }

    if (root.contains("terminals")) {
        for (const json& t : root["terminals"]) {
            Terminal term;
            term.segment = integer(t, "vessel", "terminal");
            if (!ids.count(term.segment)) fail("terminal references missing vessel id " + std::to_string(term.segment));
            const VesselSegment& seg = net.segment(term.segment);
            const double z = seg.char_impedance(net.fluid);
            term.wk.r1 = z; // R1 is the characteristic impedance of the attached segment
            if (t.contains("r2")) {
                term.wk.r2 = num(t, "r2", "terminal");
            } else {
                const double rp = num(t, "rp", "terminal");
                term.wk.r2 = rp - z;
                if (!(term.wk.r2 > 0))
                    fail("terminal " + std::to_string(term.segment) +
                         ": total resistance rp must exceed the characteristic impedance " + format_double(z));
            }
            term.wk.c = num(t, "c", "terminal");
            term.wk.pv = num_or(t, "pv", 0.0);
            check_positive(term.wk.r2, "terminal r2");
            check_positive(term.wk.c, "terminal c");
            net.terminals.push_back(term);
        }
    }

    if (root.contains("monitors")) {
        for (const json& m : root["monitors"]) {
            Monitor mon;
            mon.segment = integer(m, "vessel", "monitor");
            if (!ids.count(mon.segment)) fail("monitor references missing vessel id " + std::to_string(mon.segment));
            const VesselSegment& seg = net.segment(mon.segment);
            if (m.contains("node")) {
                mon.node = m["node"].get<int>();
            } else {
                const std::string pos = m.contains("position") ? m["position"].get<std::string>() : "mid";
                if (pos == "mid") mon.node = (seg.node_count - 1) / 2;
                else if (pos == "inlet") mon.node = 0;
                else if (pos == "outlet") mon.node = seg.node_count - 1;
                else fail("monitor position must be one of mid/inlet/outlet");
            }
            if (mon.node < 0 || mon.node >= seg.node_count)
                fail("monitor node out of range for vessel " + std::to_string(mon.segment));
            mon.label = m.contains("label") ? m["label"].get<std::string>()
                                            : std::to_string(mon.segment) + ":" + std::to_string(mon.node);
            net.monitors.push_back(mon);
        }
    }

    if (root.contains("protocol")) {
        const json& p = root["protocol"];
        net.protocol.warmup_end = num_or(p, "warmup_end", net.protocol.warmup_end);
        net.protocol.final_time = num_or(p, "final_time", net.protocol.final_time);
        net.protocol.record_start = num_or(p, "record_start", net.protocol.record_start);
        if (p.contains("sample_rate")) net.protocol.sample_rate = p["sample_rate"].get<int>();
        net.protocol.healthy_degree = num_or(p, "healthy_degree", net.protocol.healthy_degree);
    }

    // --- whole-network invariants ---

    // every segment end carries exactly one role
    std::map<int, int> start_roles, end_roles;
    start_roles[net.inlet_segment]++;
    for (const auto& j : net.junctions) {
        end_roles[j.parent]++;
        start_roles[j.child1]++;
        start_roles[j.child2]++;
    }
    for (const auto& t : net.terminals) end_roles[t.segment]++;
    if (net.stenosis) {
        end_roles[net.stenosis->proximal]++;
        start_roles[net.stenosis->distal]++;
    }
    for (const auto& seg : net.segments) {
        if (start_roles[seg.id] != 1)
            fail("invariant violated: vessel " + std::to_string(seg.id) +
                 " inlet end must have exactly one of inlet/junction/stenosis attached (found " +
                 std::to_string(start_roles[seg.id]) + ")");
        if (end_roles[seg.id] != 1)
            fail("invariant violated: vessel " + std::to_string(seg.id) +
                 " outlet end must have exactly one of junction/terminal/stenosis attached (found " +
                 std::to_string(end_roles[seg.id]) + ")");
    }

    // rooted tree: everything reachable from the inlet
    std::set<int> reached{net.inlet_segment};
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& j : net.junctions)
            if (reached.count(j.parent) && !reached.count(j.child1)) {
                reached.insert(j.child1);
                reached.insert(j.child2);
                grew = true;
            }
        if (net.stenosis && reached.count(net.stenosis->proximal) && !reached.count(net.stenosis->distal)) {
            reached.insert(net.stenosis->distal);
            grew = true;
        }
    }
    for (const auto& seg : net.segments)
        if (!reached.count(seg.id))
            fail("invariant violated: vessel " + std::to_string(seg.id) + " is not reachable from the inlet");

    // protocol invariants
    const auto& pr = net.protocol;
    if (!(pr.warmup_end >= 0 && pr.final_time > pr.warmup_end))
        fail("invariant violated: protocol needs 0 <= warmup_end < final_time");
    if (!(pr.record_start >= pr.warmup_end && pr.record_start < pr.final_time))
        fail("invariant violated: record window must lie within [warmup_end, final_time]");
    if (pr.sample_rate <= 0) fail("invariant violated: sample_rate must be positive");
    if (!near_integer(pr.sample_rate * (pr.final_time - pr.record_start)))
        fail("invariant violated: record window times sample_rate must be integral");
    if (!(pr.healthy_degree > 0 && pr.healthy_degree <= 1))
        fail("invariant violated: healthy_degree must lie in (0,1]");

    // time alignment: dt must divide the sampling interval and hit protocol boundaries exactly
    const double dt = net.solver.dt;
    const double sample_dt = 1.0 / pr.sample_rate;
    if (!near_integer(sample_dt / dt, 1e-9 * sample_dt / dt + 1e-9))
        fail("invariant violated: solver dt must divide the sampling interval 1/sample_rate");
    for (double mark : {pr.warmup_end, pr.record_start, pr.final_time})
        if (!near_integer(mark / dt, 1e-6))
            fail("invariant violated: protocol times must be integer multiples of solver dt");
    if (!near_integer(net.heart.period / dt, 1e-6))
        fail("invariant violated: heart period must be an integer multiple of solver dt");

    return net;
}

NetworkTopology load_network_file(const std::string& path) {
    return load_network(read_text_file(path));
}

std::string NetworkTopology::canonical_text() const {
    std::ostringstream os;
    auto d = [](double v) { return format_double(v); };
    os << "stenoflow-network 1\n";
    os << "fluid " << d(fluid.density) << " " << d(fluid.viscosity) << "\n";
    os << "solver " << d(solver.dt) << " " << d(solver.target_dz) << "\n";
    for (const auto& s : segments)
        os << "segment " << s.id << " " << d(s.length) << " " << d(s.rest_area) << " "
           << d(s.stiffness) << " " << d(s.dz) << " " << s.node_count << "\n";
    os << "inlet " << inlet_segment << "\n";
    const auto& h = heart;
    os << "heart " << d(h.dead_volume) << " " << d(h.max_volume) << " " << d(h.period) << " "
       << d(h.contraction_time) << " " << d(h.relaxation_time) << " " << d(h.e_max) << " "
       << d(h.e_min) << " " << d(h.resistance) << " " << d(h.separation) << " "
       << d(h.inductance) << " " << d(h.s_coeff) << "\n";
    for (const auto& j : junctions)
        os << "junction " << j.parent << " " << j.child1 << " " << j.child2 << "\n";
    for (const auto& t : terminals)
        os << "terminal " << t.segment << " " << d(t.wk.r1) << " " << d(t.wk.r2) << " "
           << d(t.wk.c) << " " << d(t.wk.pv) << "\n";
    if (stenosis)
        os << "stenosis " << stenosis->proximal << " " << stenosis->distal << " "
           << d(stenosis->length) << " " << d(stenosis->rest_area) << "\n";
    for (const auto& m : monitors)
        os << "monitor " << m.segment << " " << m.node << " " << m.label << "\n";
    os << "protocol " << d(protocol.warmup_end) << " " << d(protocol.final_time) << " "
       << d(protocol.record_start) << " " << protocol.sample_rate << " "
       << d(protocol.healthy_degree) << "\n";
    return os.str();
}

uint64_t NetworkTopology::content_hash() const {
    return fnv1a(canonical_text());
}

} // namespace stenoflow
