#include "stenoflow/estimation.hpp"
#include "stenoflow/errors.hpp"
#include "stenoflow/util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace stenoflow {

Measurement synth_measurement(const std::vector<double>& reference_curve, double true_degree,
                              double noise_level, uint64_t seed) {
    if (reference_curve.empty()) throw ConfigError("synth_measurement: empty reference curve");
    if (noise_level < 0) throw ConfigError("synth_measurement: noise level must be >= 0");
    Measurement m;
    m.values = reference_curve;
    m.true_degree = true_degree;
    m.noise_level = noise_level;
    m.seed = seed;
    Rng rng(seed);
    for (double& v : m.values) v += noise_level * rng.uniform01();
    return m;
}

namespace {

double norm2sq(const std::vector<double>& y) {
    double s = 0;
    for (double v : y) s += v * v;
    return s;
}

void check_measurement(const std::vector<double>& y, const InterpolantModel& model) {
    if (static_cast<int>(y.size()) != model.output_dim)
        throw ConfigError("measurement length " + std::to_string(y.size()) +
                          " does not match model output dimension " +
                          std::to_string(model.output_dim));
    if (norm2sq(y) == 0.0) throw ConfigError("measurement has zero norm");
}

} // namespace

double cost(double degree, const std::vector<double>& y, const InterpolantModel& model) {
    check_measurement(y, model);
    const Eigen::VectorXd pred = model.evaluate(degree);
    double s = 0;
    for (std::size_t j = 0; j < y.size(); ++j) {
        const double d = y[j] - pred[static_cast<Eigen::Index>(j)];
        s += d * d;
    }
    return s / (2.0 * norm2sq(y));
}

double cost_gradient(double degree, const std::vector<double>& y, const InterpolantModel& model) {
    check_measurement(y, model);
    const Eigen::VectorXd pred = model.evaluate(degree);
    const Eigen::VectorXd dpred = model.evaluate_derivative(degree);
    double s = 0;
    for (std::size_t j = 0; j < y.size(); ++j)
        s += (y[j] - pred[static_cast<Eigen::Index>(j)]) * dpred[static_cast<Eigen::Index>(j)];
    return -s / norm2sq(y);
}

namespace {

struct LocalResult {
    double x, j;
    int iterations;
    bool converged;
};

LocalResult projected_descent(double start, const std::vector<double>& y,
                              const InterpolantModel& model, const OptimizerSettings& cfg) {
    auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
    double x = clamp01(start);
    double jx = cost(x, y, model);
    double g = cost_gradient(x, y, model);
    double step = 1.0 / (1.0 + std::abs(g)); // scale-free first trial step
    int it = 0;
    bool converged = false;
    double prev_x = x, prev_g = g;
    bool have_prev = false;

    for (; it < cfg.max_iters; ++it) {
        // projected-gradient stationarity measure
        const double pg = x - clamp01(x - g);
        if (std::abs(pg) <= cfg.grad_tol) {
            converged = true;
            break;
        }
        if (have_prev) {
            // Barzilai-Borwein trial step, clipped to a sane range
            const double dx = x - prev_x, dg = g - prev_g;
            if (dx != 0.0 && dg != 0.0) step = std::clamp(std::abs(dx / dg), 1e-12, 1e6);
        }
        double t = step;
        double xn = x, jn = jx;
        bool moved = false;
        for (int bt = 0; bt < 60; ++bt) {
            xn = clamp01(x - t * g);
            if (xn == x) break;
            jn = cost(xn, y, model);
            if (jn <= jx + cfg.armijo_c * g * (xn - x)) {
                moved = true;
                break;
            }
            t *= cfg.shrink;
        }
        if (!moved) {
            converged = std::abs(x - clamp01(x - g)) <= 1e2 * cfg.grad_tol;
            break;
        }
        prev_x = x;
        prev_g = g;
        have_prev = true;
        x = xn;
        jx = jn;
        g = cost_gradient(x, y, model);
    }
    return {x, jx, it, converged};
}

} // namespace

EstimationResult estimate(const std::vector<double>& y, const InterpolantModel& model,
                          const OptimizerSettings& settings, bool with_scan, int scan_points) {
    check_measurement(y, model);
    if (settings.starts.empty()) throw ConfigError("estimate: no starting points");

    EstimationResult best;
    best.cost_value = std::numeric_limits<double>::infinity();
    for (const double s : settings.starts) {
        const LocalResult r = projected_descent(s, y, model, settings);
        best.iterations += r.iterations;
        best.converged = best.converged || r.converged;
        if (r.j < best.cost_value) {
            best.cost_value = r.j;
            best.degree = r.x;
        }
    }

    if (with_scan) {
        best.profile = cost_profile(y, model, scan_points);
        double scan_x = best.profile.front().first, scan_j = best.profile.front().second;
        for (const auto& [x, j] : best.profile)
            if (j < scan_j) {
                scan_j = j;
                scan_x = x;
            }
        if (scan_j < best.cost_value) {
            // descent missed this basin; polish from the scan minimum
            const LocalResult r = projected_descent(scan_x, y, model, settings);
            best.iterations += r.iterations;
            if (r.j < best.cost_value) {
                best.cost_value = r.j;
                best.degree = r.x;
                best.converged = best.converged || r.converged;
            }
            if (scan_j < best.cost_value) {
                best.cost_value = scan_j;
                best.degree = scan_x;
            }
        }
    }
    return best;
}

std::vector<std::pair<double, double>> cost_profile(const std::vector<double>& y,
                                                    const InterpolantModel& model, int grid_size) {
    if (grid_size < 2) throw ConfigError("cost_profile: grid size must be >= 2");
    std::vector<std::pair<double, double>> out;
    out.reserve(static_cast<std::size_t>(grid_size));
    for (int i = 0; i < grid_size; ++i) {
        const double x = static_cast<double>(i) / (grid_size - 1);
        out.emplace_back(x, cost(x, y, model));
    }
    return out;
}

void save_estimation_report(const std::string& path, const Measurement& m,
                            const EstimationResult& r, const std::string& model_file) {
    std::ostringstream os;
    os << "# stenoflow-estimation 1\n";
    os << "# model " << model_file << "\n";
    os << "noise_level " << format_double(m.noise_level) << "\n";
    os << "seed " << m.seed << "\n";
    os << "estimated_degree " << format_double(r.degree) << "\n";
    os << "final_cost " << format_double(r.cost_value) << "\n";
    os << "iterations " << r.iterations << "\n";
    os << "converged " << (r.converged ? 1 : 0) << "\n";
    if (m.true_degree >= 0) {
        os << "true_degree " << format_double(m.true_degree) << "\n";
        os << "error " << format_double(std::abs(r.degree - m.true_degree)) << "\n";
    }
    if (!r.profile.empty()) {
        os << "# profile degree,cost\n";
        for (const auto& [x, j] : r.profile)
            os << format_double(x) << "," << format_double(j) << "\n";
    }
    write_text_file(path, os.str());
}

} // namespace stenoflow
