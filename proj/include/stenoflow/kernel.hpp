#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace stenoflow {

enum class KernelFamily {
    gaussian,    // exp(-eps^2 |x-y|^2)
    wendland_c2, // (1-r)^3 (3r+1), r = eps |x-y|
    wendland_c0, // (1-r), compact, not differentiable at r = 0 and r = 1
};

std::string kernel_family_name(KernelFamily f);
KernelFamily kernel_family_from_name(const std::string& name);

struct KernelConfig {
    KernelFamily family = KernelFamily::gaussian;
    double shape = 1.0;          // eps > 0
    double regularization = 0.0; // lambda >= 0
};

double kernel_eval(const KernelConfig& kc, double x, double y);
/// d/dx K(x, y). Throws for kernels that are not differentiable at the point.
double kernel_derivative_x(const KernelConfig& kc, double x, double y);

Eigen::MatrixXd kernel_matrix(const std::vector<double>& points, const KernelConfig& kc);

/// Sparse or dense kernel expansion f(x) = sum_j alpha_j K(x, x_j), alpha_j in R^q.
class InterpolantModel {
public:
    KernelConfig kernel;
    std::vector<double> centers;
    Eigen::MatrixXd coefficients; // centers.size() x q
    int output_dim = 0;
    std::map<std::string, std::string> meta; // provenance, written to the model file

    Eigen::VectorXd evaluate(double x) const;
    Eigen::VectorXd evaluate_derivative(double x) const;

    void save(const std::string& path) const;
    static InterpolantModel load(const std::string& path);
};

/// Solves (A + lambda I) alpha = F for all q columns at once (shared centers).
/// On factorization failure retries once with lambda bumped to
/// max(lambda, 1e-12 * trace/n); reports a condition estimate if that fails too.
InterpolantModel fit_interpolant(const std::vector<double>& points, const Eigen::MatrixXd& values,
                                 const KernelConfig& kc);

} // namespace stenoflow
