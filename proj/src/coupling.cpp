#include "stenoflow/coupling.hpp"
#include "stenoflow/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace stenoflow {

namespace {

/// Pointwise boundary state and its derivatives w.r.t. the characteristic pair.
struct EndState {
    double area, v, flow, pressure, p_total;
    double dq_dw1, dq_dw2, dpt_dw1, dpt_dw2;
};

EndState end_state(double w1, double w2, const VesselSegment& seg, const FluidProperties& fluid) {
    const double c0 = seg.rest_wave_speed(fluid);
    const double base = 1.0 + (w1 + w2) / (8.0 * c0);
    if (!(base > 0))
        throw NumericalError("boundary state collapsed in segment " + std::to_string(seg.id));
    const double b2 = base * base;
    EndState s;
    s.area = seg.rest_area * b2 * b2;
    s.v = 0.5 * (w2 - w1);
    s.flow = s.area * s.v;
    s.pressure = seg.stiffness * (b2 - 1.0);
    s.p_total = 0.5 * fluid.density * s.v * s.v + s.pressure;
    const double da_ds = s.area / (2.0 * c0 * base); // d(area)/d(w1+w2)
    const double dp_ds = seg.stiffness * base / (4.0 * c0);
    s.dq_dw1 = da_ds * s.v - 0.5 * s.area;
    s.dq_dw2 = da_ds * s.v + 0.5 * s.area;
    s.dpt_dw1 = -0.5 * fluid.density * s.v + dp_ds;
    s.dpt_dw2 = 0.5 * fluid.density * s.v + dp_ds;
    return s;
}

/// Subcritical window for the unknown ingoing characteristic given the outgoing
/// one: between the sonic lines v = +v_c and v = -v_c. The imposed-flow and
/// windkessel residuals are strictly monotone only inside it.
std::pair<double, double> subcritical_window(double outgoing, double c0) {
    const double lo = (3.0 * outgoing - 8.0 * c0) / 5.0;
    const double hi = (8.0 * c0 + 5.0 * outgoing) / 3.0;
    return {lo, hi};
}

/// Safeguarded Newton on a residual that is monotone inside (dom_lo, dom_hi):
/// Newton step when it stays inside the current sign-change bracket, bisection
/// otherwise. The bracket never leaves the domain window.
template <typename F, typename DF>
double solve_monotone(F f, DF df, double x0, double dom_lo, double dom_hi, double tol_f,
                      const char* who) {
    const double margin = 1e-9 * (dom_hi - dom_lo);
    const double wlo = dom_lo + margin, whi = dom_hi - margin;
    double x = std::clamp(x0, wlo, whi);
    double fx = f(x);
    if (std::abs(fx) <= tol_f) return x;

    // expand a bracket around x, clamped to the domain window
    double lo = x, hi = x, flo = fx, fhi = fx;
    double h = 1e-3 * (1.0 + std::abs(x));
    for (int k = 0; k < 80 && flo * fhi > 0; ++k) {
        lo = std::max(x - h, wlo);
        hi = std::min(x + h, whi);
        flo = f(lo);
        fhi = f(hi);
        if (lo == wlo && hi == whi) break;
        h *= 2.0;
    }
    if (flo * fhi > 0)
        throw NumericalError(std::string(who) +
                             ": no subcritical solution brackets the boundary condition");

    for (int it = 0; it < 200; ++it) {
        const double d = df(x);
        double xn = (d != 0.0) ? x - fx / d : 0.5 * (lo + hi);
        if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
        const double fn = f(xn);
        if (std::abs(fn) <= tol_f) return xn;
        if (flo * fn <= 0) {
            hi = xn;
            fhi = fn;
        } else {
            lo = xn;
            flo = fn;
        }
        if (std::abs(xn - x) <= 1e-15 * (1.0 + std::abs(xn)) && std::abs(fn) <= 1e4 * tol_f)
            return xn;
        x = xn;
        fx = fn;
        if (hi - lo <= 1e-15 * (1.0 + std::abs(x))) return 0.5 * (lo + hi);
    }
    throw NumericalError(std::string(who) + ": boundary solve did not converge, residual " +
                         format_double(fx));
}

} // namespace

// ---------------------------------------------------------------------------
// heart

HeartState HeartState::initial(const HeartParams& hp) {
    HeartState hs;
    hs.volume = hp.max_volume;
    hs.q_lv = 0;
    hs.p_lv = 0;
    hs.systole = false;
    return hs;
}

double elastance(double t, const HeartParams& hp) {
    double tm = std::fmod(t, hp.period);
    if (tm < 0) tm += hp.period;
    double ev = 0.0;
    if (tm <= hp.contraction_time) {
        ev = 0.5 * (1.0 - std::cos(kPi * tm / hp.contraction_time));
    } else if (tm <= hp.contraction_time + hp.relaxation_time) {
        ev = 0.5 * (1.0 + std::cos(kPi * (tm - hp.contraction_time) / hp.relaxation_time));
    }
    return hp.e_max * ev + hp.e_min;
}

double ventricle_pressure(double t, double volume, double q_lv, double p_lv_prev,
                          const HeartParams& hp) {
    // P = E(t)(V - V0) + S(t) Q_LV with S = s_coeff * P_LV; the S factor uses the
    // stored previous ventricle pressure, keeping the update explicit first order.
    // The viscoelastic correction saturates at the elastic pressure: without the
    // bound the S feedback has a pole at Q = 1/s_coeff and cold starts blow up.
    const double elastic = elastance(t, hp) * (volume - hp.dead_volume);
    const double visco = hp.s_coeff * p_lv_prev * q_lv;
    const double bound = std::abs(elastic);
    return elastic + std::clamp(visco, -bound, bound);
}

HeartStepResult heart_step(const HeartState& hs, double p_root, double outgoing_w1, double t,
                           double dt, bool beat_reset, const HeartParams& hp,
                           const VesselSegment& root_seg, const FluidProperties& fluid) {
    HeartState next = hs;
    if (beat_reset) {
        // reactivate the model at the begin of the heart cycle
        next.volume = hp.max_volume;
        next.q_lv = 0.0;
        next.systole = false;
    }

    const double p_lv = ventricle_pressure(t, next.volume, next.q_lv, next.p_lv, hp);
    const double dp_v = p_lv - p_root;

    if (!next.systole && dp_v > 0) {
        next.systole = true; // valve opens on a positive gradient
    }
    if (next.systole) {
        // ejection: Bernoulli valve law, explicit first order; momentum may carry
        // the flow against an adverse gradient until it reverses
        const double q = next.q_lv;
        const double dq = (dp_v - hp.resistance * q - hp.separation * q * std::abs(q)) / hp.inductance;
        next.q_lv = q + dt * dq;
        next.volume -= dt * q;
        if (next.q_lv <= 0.0) {
            // flow reversal: the valve closes
            next.q_lv = 0.0;
            next.systole = false;
        }
    } else {
        // isovolumetric contraction (valve not yet open) or diastole
        next.q_lv = 0.0;
    }
    next.p_lv = p_lv;
    if (!std::isfinite(next.q_lv) || !std::isfinite(next.volume))
        throw NumericalError("heart state diverged at t = " + format_double(t));

    const double w2 = solve_flow_boundary(next.q_lv, outgoing_w1, /*ingoing_is_w1=*/false,
                                          root_seg, fluid, "heart inlet");
    return {next, w2};
}

// ---------------------------------------------------------------------------
// bifurcation

double total_pressure(const CharacteristicPair& w, const VesselSegment& seg,
                      const FluidProperties& fluid) {
    return end_state(w.w1, w.w2, seg, fluid).p_total;
}

BifurcationUnknowns bifurcation_solve(const std::array<double, 3>& outgoing,
                                      const VesselSegment& parent, const VesselSegment& child1,
                                      const VesselSegment& child2, const FluidProperties& fluid,
                                      const BifurcationUnknowns& start, int junction_id) {
    const double c0p = parent.rest_wave_speed(fluid);
    const double q_scale = parent.rest_area * c0p;
    const double p_scale = fluid.density * c0p * c0p;

    Eigen::Vector3d x(start.parent_w1, start.child1_w2, start.child2_w2);
    Eigen::Vector3d r;
    Eigen::Matrix3d jac;

    auto assemble = [&](const Eigen::Vector3d& u, Eigen::Vector3d& res, Eigen::Matrix3d* J) {
        const EndState p = end_state(u[0], outgoing[0], parent, fluid);
        const EndState c1 = end_state(outgoing[1], u[1], child1, fluid);
        const EndState c2 = end_state(outgoing[2], u[2], child2, fluid);
        res[0] = (p.flow - c1.flow - c2.flow) / q_scale;
        res[1] = (p.p_total - c1.p_total) / p_scale;
        res[2] = (p.p_total - c2.p_total) / p_scale;
        if (J) {
            (*J)(0, 0) = p.dq_dw1 / q_scale;
            (*J)(0, 1) = -c1.dq_dw2 / q_scale;
            (*J)(0, 2) = -c2.dq_dw2 / q_scale;
            (*J)(1, 0) = p.dpt_dw1 / p_scale;
            (*J)(1, 1) = -c1.dpt_dw2 / p_scale;
            (*J)(1, 2) = 0.0;
            (*J)(2, 0) = p.dpt_dw1 / p_scale;
            (*J)(2, 1) = 0.0;
            (*J)(2, 2) = -c2.dpt_dw2 / p_scale;
        }
    };

    constexpr double tol = 1e-10; // absolute, in characteristic units
    constexpr int max_iter = 50;
    assemble(x, r, nullptr);
    for (int it = 0; it < max_iter; ++it) {
        if (r.lpNorm<Eigen::Infinity>() < tol)
            return {x[0], x[1], x[2]};
        assemble(x, r, &jac);
        const Eigen::Vector3d step = jac.partialPivLu().solve(-r);
        // damp steps that would collapse a vessel end
        double alpha = 1.0;
        Eigen::Vector3d xn;
        for (int halve = 0; halve < 40; ++halve) {
            xn = x + alpha * step;
            try {
                Eigen::Vector3d rn;
                assemble(xn, rn, nullptr);
                if (!rn.allFinite()) throw NumericalError("non-finite residual");
                x = xn;
                r = rn;
                break;
            } catch (const NumericalError&) {
                alpha *= 0.5;
                if (halve == 39) throw;
            }
        }
    }
    if (r.lpNorm<Eigen::Infinity>() < tol) return {x[0], x[1], x[2]};
    throw NumericalError("bifurcation Newton did not converge at junction " +
                         std::to_string(junction_id) + ", scaled residual " +
                         format_double(r.lpNorm<Eigen::Infinity>()));
}

// ---------------------------------------------------------------------------
// windkessel

double windkessel_solve(double outgoing_w2, const WindkesselState& prev, double dt,
                        const WindkesselParams& wp, const VesselSegment& seg,
                        const FluidProperties& fluid, int terminal_id) {
    const double rc = wp.r2 * wp.c / dt;
    const double r12 = wp.r1 + wp.r2;
    const double lc = wp.r1 * wp.r2 * wp.c / dt;

    auto residual = [&](double w1) {
        const EndState s = end_state(w1, outgoing_w2, seg, fluid);
        return (1.0 + rc) * s.pressure - rc * prev.pressure - wp.pv - r12 * s.flow -
               lc * (s.flow - prev.flow);
    };
    auto slope = [&](double w1) {
        const EndState s = end_state(w1, outgoing_w2, seg, fluid);
        const double c0 = seg.rest_wave_speed(fluid);
        const double base = 1.0 + (w1 + outgoing_w2) / (8.0 * c0);
        const double dp_dw1 = seg.stiffness * base / (4.0 * c0);
        return (1.0 + rc) * dp_dw1 - (r12 + lc) * s.dq_dw1;
    };

    const double scale = std::max({1.0, std::abs(prev.pressure), std::abs(r12 * prev.flow),
                                   std::abs(wp.pv)});
    const std::string who = "windkessel terminal " + std::to_string(terminal_id);
    const auto [lo, hi] = subcritical_window(outgoing_w2, seg.rest_wave_speed(fluid));
    return solve_monotone(residual, slope, /*x0=*/outgoing_w2, lo, hi, 1e-10 * scale, who.c_str());
}

// ---------------------------------------------------------------------------
// stenosis

StenosisCoefficients stenosis_coefficients(const StenosisPlacement& sp, double degree) {
    StenosisCoefficients c;
    c.narrowed_area = (1.0 - degree) * sp.rest_area;
    c.diameter = 2.0 * std::sqrt(std::max(c.narrowed_area, 0.0) / kPi);
    if (c.narrowed_area > 0) {
        const double ratio = sp.rest_area / c.narrowed_area;
        c.k_v = 32.0 * (0.83 * sp.length + 1.64 * c.diameter) * ratio * ratio / c.diameter;
    } else {
        c.k_v = std::numeric_limits<double>::infinity();
    }
    return c;
}

namespace {

struct StenosisOde {
    double inertia, visc, turb;
};

StenosisOde stenosis_ode_terms(const StenosisPlacement& sp, double degree,
                               const FluidProperties& fluid) {
    const StenosisCoefficients co = stenosis_coefficients(sp, degree);
    StenosisOde o;
    o.inertia = StenosisCoefficients::k_u * fluid.density * sp.length / sp.rest_area;
    o.visc = co.k_v * fluid.viscosity * sp.length / (sp.rest_area * co.diameter);
    const double area_def = sp.rest_area / co.narrowed_area - 1.0;
    o.turb = StenosisCoefficients::k_t * fluid.density / (2.0 * sp.rest_area * sp.rest_area) *
             area_def * area_def;
    return o;
}

} // namespace

double stenosis_ode_residual(double q_new, double q_old, double dp, double dt,
                             const StenosisPlacement& sp, double degree,
                             const FluidProperties& fluid) {
    const StenosisOde o = stenosis_ode_terms(sp, degree, fluid);
    return o.inertia * (q_new - q_old) / dt - dp + o.visc * q_new +
           o.turb * q_new * std::abs(q_new);
}

StenosisStepResult stenosis_step(const StenosisState& ss, double w2_prox, double w1_dist,
                                 double dt, const StenosisPlacement& sp, double degree,
                                 const VesselSegment& prox, const VesselSegment& dist,
                                 const FluidProperties& fluid, double time_now) {
    StenosisStepResult out;
    if (degree >= 1.0) {
        // occluded limit: Q_s = 0, both ingoing characteristics fully reflect
        out.state.q_s = 0.0;
        out.prox_w1 = w2_prox;
        out.dist_w2 = w1_dist;
        return out;
    }

    const StenosisOde o = stenosis_ode_terms(sp, degree, fluid);
    const double c0p = prox.rest_wave_speed(fluid);
    const double q_scale = prox.rest_area * c0p;
    const double p_scale = fluid.density * c0p * c0p;

    // unknowns: (w1 at proximal outlet, w2 at distal inlet, q_new)
    Eigen::Vector3d x(w2_prox, w1_dist, ss.q_s);
    Eigen::Vector3d r;
    Eigen::Matrix3d jac;

    auto assemble = [&](const Eigen::Vector3d& u, Eigen::Vector3d& res, Eigen::Matrix3d* J) {
        const EndState sp_end = end_state(u[0], w2_prox, prox, fluid);
        const EndState sd_end = end_state(w1_dist, u[1], dist, fluid);
        const double q = u[2];
        res[0] = (sp_end.flow - q) / q_scale;
        res[1] = (sd_end.flow - q) / q_scale;
        res[2] = (o.inertia * (q - ss.q_s) / dt - (sp_end.pressure - sd_end.pressure) +
                  o.visc * q + o.turb * q * std::abs(q)) /
                 p_scale;
        if (J) {
            const double c0d = dist.rest_wave_speed(fluid);
            const double base_p = 1.0 + (u[0] + w2_prox) / (8.0 * c0p);
            const double base_d = 1.0 + (w1_dist + u[1]) / (8.0 * c0d);
            const double dpp_dw1 = prox.stiffness * base_p / (4.0 * c0p);
            const double dpd_dw2 = dist.stiffness * base_d / (4.0 * c0d);
            J->setZero();
            (*J)(0, 0) = sp_end.dq_dw1 / q_scale;
            (*J)(0, 2) = -1.0 / q_scale;
            (*J)(1, 1) = sd_end.dq_dw2 / q_scale;
            (*J)(1, 2) = -1.0 / q_scale;
            (*J)(2, 0) = -dpp_dw1 / p_scale;
            (*J)(2, 1) = dpd_dw2 / p_scale;
            (*J)(2, 2) = (o.inertia / dt + o.visc + 2.0 * o.turb * std::abs(q)) / p_scale;
        }
    };

    constexpr double tol = 1e-10;
    constexpr int max_iter = 80;
    assemble(x, r, nullptr);
    for (int it = 0; it < max_iter; ++it) {
        if (r.lpNorm<Eigen::Infinity>() < tol) break;
        assemble(x, r, &jac);
        const Eigen::Vector3d step = jac.partialPivLu().solve(-r);
        double alpha = 1.0;
        for (int halve = 0; halve < 40; ++halve) {
            const Eigen::Vector3d xn = x + alpha * step;
            try {
                Eigen::Vector3d rn;
                assemble(xn, rn, nullptr);
                if (!rn.allFinite()) throw NumericalError("non-finite residual");
                x = xn;
                r = rn;
                break;
            } catch (const NumericalError&) {
                alpha *= 0.5;
                if (halve == 39) throw;
            }
        }
    }
    if (!(r.lpNorm<Eigen::Infinity>() < tol) || !std::isfinite(x[2]))
        throw NumericalError("stenosis coupling did not converge (R_s = " + format_double(degree) +
                             ", t = " + format_double(time_now) + ", scaled residual " +
                             format_double(r.lpNorm<Eigen::Infinity>()) + ")");
    out.state.q_s = x[2];
    out.prox_w1 = x[0];
    out.dist_w2 = x[1];
    return out;
}

// ---------------------------------------------------------------------------
// shared flow-rate imposition

double solve_flow_boundary(double target, double outgoing, bool ingoing_is_w1,
                           const VesselSegment& seg, const FluidProperties& fluid,
                           const char* who) {
    auto residual = [&](double x) {
        const EndState s = ingoing_is_w1 ? end_state(x, outgoing, seg, fluid)
                                         : end_state(outgoing, x, seg, fluid);
        return s.flow - target;
    };
    auto slope = [&](double x) {
        const EndState s = ingoing_is_w1 ? end_state(x, outgoing, seg, fluid)
                                         : end_state(outgoing, x, seg, fluid);
        return ingoing_is_w1 ? s.dq_dw1 : s.dq_dw2;
    };
    const double c0 = seg.rest_wave_speed(fluid);
    const double tol = 1e-12 * std::max(1.0, std::abs(target)) +
                       1e-14 * seg.rest_area * c0;
    const auto [lo, hi] = subcritical_window(outgoing, c0);
    return solve_monotone(residual, slope, /*x0=*/outgoing, lo, hi, tol, who);
}

} // namespace stenoflow
