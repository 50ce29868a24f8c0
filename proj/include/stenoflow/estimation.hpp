#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stenoflow/kernel.hpp"

namespace stenoflow {

/// Noisy synthetic measurement y = f(R*) + sigma * v, v ~ U(0,1)^q componentwise
/// (additive, not zero-mean; reproduced as stated).
struct Measurement {
    std::vector<double> values;
    double true_degree = -1; // < 0 when unknown
    double noise_level = 0;
    uint64_t seed = 0;
};

Measurement synth_measurement(const std::vector<double>& reference_curve, double true_degree,
                              double noise_level, uint64_t seed);

/// J(R_s) = 1/(2 ||y||^2) * sum_j (y_j - fhat_j(R_s))^2.
double cost(double degree, const std::vector<double>& y, const InterpolantModel& model);

/// dJ/dR_s = -1/||y||^2 * sum_j (y_j - fhat_j) * fhat_j'  (the true chain-rule sign,
/// verified against finite differences).
double cost_gradient(double degree, const std::vector<double>& y, const InterpolantModel& model);

struct OptimizerSettings {
    std::vector<double> starts = {0.05, 0.25, 0.5, 0.75, 0.95};
    double armijo_c = 1e-4;
    double shrink = 0.5;
    int max_iters = 200;
    double grad_tol = 1e-10;
};

struct EstimationResult {
    double degree = 0; // R~* in [0,1]
    double cost_value = 0;
    int iterations = 0;
    bool converged = false;
    std::vector<std::pair<double, double>> profile; // optional scan (R_s, J)
};

/// Multi-start projected gradient descent with Armijo backtracking on [0,1];
/// optionally cross-checked against a dense scan whose best cell is polished too.
EstimationResult estimate(const std::vector<double>& y, const InterpolantModel& model,
                          const OptimizerSettings& settings = {}, bool with_scan = false,
                          int scan_points = 1001);

std::vector<std::pair<double, double>> cost_profile(const std::vector<double>& y,
                                                    const InterpolantModel& model, int grid_size);

void save_estimation_report(const std::string& path, const Measurement& m,
                            const EstimationResult& r, const std::string& model_file);

} // namespace stenoflow
