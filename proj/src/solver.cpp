#include "stenoflow/solver.hpp"
#include "stenoflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace stenoflow {

namespace {

inline double quartic_root(double x) { return std::sqrt(std::sqrt(x)); }

inline double lerp_at(const std::vector<double>& values, double pos, double dz, int nodes) {
    double s = pos / dz;
    if (s <= 0) return values.front();
    if (s >= nodes - 1) return values.back();
    const int i = static_cast<int>(s);
    const double f = s - i;
    return values[i] + f * (values[i + 1] - values[i]);
}

[[noreturn]] void throw_supercritical(const VesselSegment& seg, double v, double vc) {
    throw NumericalError("supercritical flow in segment " + std::to_string(seg.id) +
                         ": |v| = " + format_double(std::abs(v)) +
                         " >= 0.99 * v_c = " + format_double(0.99 * vc));
}

} // namespace

SegmentField SegmentField::rest(const VesselSegment& seg) {
    SegmentField f;
    const auto n = static_cast<std::size_t>(seg.node_count);
    f.area.assign(n, seg.rest_area);
    f.flow.assign(n, 0.0);
    f.w1.assign(n, 0.0);
    f.w2.assign(n, 0.0);
    return f;
}

void SegmentField::sync_characteristics(const VesselSegment& seg, const FluidProperties& fluid) {
    for (std::size_t k = 0; k < area.size(); ++k) {
        const CharacteristicPair w = to_characteristics(area[k], flow[k], seg, fluid);
        w1[k] = w.w1;
        w2[k] = w.w2;
    }
}

double wave_speed(double area, const VesselSegment& seg, const FluidProperties& fluid) {
    if (!(area > 0))
        throw NumericalError("wave_speed: section area must be positive (segment " +
                             std::to_string(seg.id) + ")");
    return seg.rest_wave_speed(fluid) * quartic_root(area / seg.rest_area);
}

std::pair<double, double> eigenvalues(double area, double flow, const VesselSegment& seg,
                                      const FluidProperties& fluid) {
    const double vc = wave_speed(area, seg, fluid);
    const double v = flow / area;
    if (std::abs(v) >= 0.99 * vc) throw_supercritical(seg, v, vc);
    return {v - vc, v + vc};
}

CharacteristicPair to_characteristics(double area, double flow, const VesselSegment& seg,
                                      const FluidProperties& fluid) {
    if (!(area > 0))
        throw NumericalError("to_characteristics: section area must be positive (segment " +
                             std::to_string(seg.id) + ")");
    const double c0 = seg.rest_wave_speed(fluid);
    const double v = flow / area;
    const double stretch = 4.0 * c0 * (quartic_root(area / seg.rest_area) - 1.0);
    return {-v + stretch, v + stretch};
}

std::pair<double, double> from_characteristics(const CharacteristicPair& w, const VesselSegment& seg,
                                               const FluidProperties& fluid) {
    const double c0 = seg.rest_wave_speed(fluid);
    const double base = 1.0 + (w.w1 + w.w2) / (8.0 * c0);
    if (!(base > 0))
        throw NumericalError("from_characteristics: vessel collapsed in segment " +
                             std::to_string(seg.id) + " (quartic base " + format_double(base) + ")");
    const double b2 = base * base;
    const double area = seg.rest_area * b2 * b2;
    const double v = 0.5 * (w.w2 - w.w1);
    return {area, area * v};
}

std::pair<double, double> trace_feet(int node, const SegmentField& field, double dt,
                                     const VesselSegment& seg, const FluidProperties& fluid) {
    const double z = node * seg.dz;
    const double l = seg.length;
    const auto [l1, l2] = eigenvalues(field.area[node], field.flow[node], seg, fluid);

    auto refine = [&](double lam, int which) {
        const double g0 = z - dt * lam;
        const double gc = std::clamp(g0, 0.0, l);
        const double a = lerp_at(field.area, gc, seg.dz, seg.node_count);
        const double q = lerp_at(field.flow, gc, seg.dz, seg.node_count);
        const auto [m1, m2] = eigenvalues(a, q, seg, fluid);
        return z - dt * (which == 1 ? m1 : m2);
    };
    return {refine(l1, 1), refine(l2, 2)};
}

CharacteristicPair source_term(const CharacteristicPair& w, const VesselSegment& seg,
                               const FluidProperties& fluid) {
    const double kr = fluid.friction();
    const double v = 0.5 * (w.w2 - w.w1);
    if (kr == 0.0 || v == 0.0) return {0.0, 0.0};
    const auto [area, flow] = from_characteristics(w, seg, fluid);
    (void)flow;
    const double rate = kr * v / area;
    return {rate, -rate};
}

namespace {

struct SegmentScratch {
    double c0, kr, dz, l;
    int nodes;
};

inline double char_source(double w1, double w2, const SegmentScratch& s) {
    // L*S for S = (0, -K_r Q/A): dW1/dt = +K_r v/A, dW2/dt = -K_r v/A
    if (s.kr == 0.0) return 0.0;
    const double v = 0.5 * (w2 - w1);
    const double base = 1.0 + (w1 + w2) / (8.0 * s.c0);
    const double b2 = base * base;
    const double area_ratio = b2 * b2;
    return s.kr * v / area_ratio; // divided by A0 later by the caller
}

/// Advect characteristic `which` (1 or 2) of node k to t_{n+1}.
double advect_node(int k, int which, double foot, const SegmentField& f, double dt,
                   const BoundaryValues& bv, const VesselSegment& seg, const SegmentScratch& s) {
    const double z = k * s.dz;
    double wj, w_other, span;
    if (foot >= 0.0 && foot <= s.l) {
        wj = lerp_at(which == 1 ? f.w1 : f.w2, foot, s.dz, s.nodes);
        w_other = lerp_at(which == 1 ? f.w2 : f.w1, foot, s.dz, s.nodes);
        span = dt;
    } else if (which == 2 && foot < 0.0) {
        // characteristic entered through z = 0 at t* in (t_n, t_{n+1}]
        const double theta = -foot / (z - foot);
        wj = (1.0 - theta) * f.w2.front() + theta * bv.inlet_w2;
        w_other = f.w1.front();
        span = dt * (1.0 - theta);
    } else if (which == 1 && foot > s.l) {
        const double theta = (s.l - foot) / (z - foot);
        wj = (1.0 - theta) * f.w1.back() + theta * bv.outlet_w1;
        w_other = f.w2.back();
        span = dt * (1.0 - theta);
    } else {
        // unreachable for subcritical flow; fall back to the nearest boundary value
        wj = (which == 1) ? f.w1.front() : f.w2.back();
        w_other = (which == 1) ? f.w2.front() : f.w1.back();
        span = dt;
    }
    if (span != 0.0 && s.kr != 0.0) {
        const double w1v = (which == 1) ? wj : w_other;
        const double w2v = (which == 1) ? w_other : wj;
        const double rate = char_source(w1v, w2v, s) / seg.rest_area;
        wj += span * (which == 1 ? rate : -rate);
    }
    return wj;
}

SegmentScratch make_scratch(const VesselSegment& seg, const FluidProperties& fluid) {
    return {seg.rest_wave_speed(fluid), fluid.friction(), seg.dz, seg.length, seg.node_count};
}

} // namespace

void nmc_step(SegmentField& field, double dt, const BoundaryValues& bv, const VesselSegment& seg,
              const FluidProperties& fluid, double time_now) {
    const SegmentScratch s = make_scratch(seg, fluid);
    const int n = seg.node_count;
    std::vector<double> nw1(n), nw2(n);

    for (int k = 0; k < n; ++k) {
        std::pair<double, double> feet;
        try {
            feet = trace_feet(k, field, dt, seg, fluid);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " at node " + std::to_string(k) +
                                 ", t = " + format_double(time_now));
        }
        nw1[k] = advect_node(k, 1, feet.first, field, dt, bv, seg, s);
        nw2[k] = advect_node(k, 2, feet.second, field, dt, bv, seg, s);
    }

    for (int k = 0; k < n; ++k) {
        const double base = 1.0 + (nw1[k] + nw2[k]) / (8.0 * s.c0);
        if (!(base > 0))
            throw NumericalError("vessel collapsed in segment " + std::to_string(seg.id) +
                                 " at node " + std::to_string(k) + ", t = " + format_double(time_now));
        const double b2 = base * base;
        const double area = seg.rest_area * b2 * b2;
        const double v = 0.5 * (nw2[k] - nw1[k]);
        const double vc = s.c0 * base;
        if (std::abs(v) >= 0.99 * vc)
            throw NumericalError("supercritical flow in segment " + std::to_string(seg.id) +
                                 " at node " + std::to_string(k) + ", t = " + format_double(time_now));
        field.w1[k] = nw1[k];
        field.w2[k] = nw2[k];
        field.area[k] = area;
        field.flow[k] = area * v;
    }
}

double extrapolate_outgoing_w1(const SegmentField& field, double dt, const VesselSegment& seg,
                               const FluidProperties& fluid) {
    const SegmentScratch s = make_scratch(seg, fluid);
    const auto feet = trace_feet(0, field, dt, seg, fluid);
    const double g = std::clamp(feet.first, 0.0, s.l);
    const double w1 = lerp_at(field.w1, g, s.dz, s.nodes);
    const double w2 = lerp_at(field.w2, g, s.dz, s.nodes);
    return w1 + dt * char_source(w1, w2, s) / seg.rest_area;
}

double extrapolate_outgoing_w2(const SegmentField& field, double dt, const VesselSegment& seg,
                               const FluidProperties& fluid) {
    const SegmentScratch s = make_scratch(seg, fluid);
    const auto feet = trace_feet(seg.node_count - 1, field, dt, seg, fluid);
    const double g = std::clamp(feet.second, 0.0, s.l);
    const double w1 = lerp_at(field.w1, g, s.dz, s.nodes);
    const double w2 = lerp_at(field.w2, g, s.dz, s.nodes);
    return w2 - dt * char_source(w1, w2, s) / seg.rest_area;
}

} // namespace stenoflow
