#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "stenoflow/kernel.hpp"

namespace stenoflow {

struct GreedyStopping {
    double power_tol = 5e-8;      // on the squared regularized power function P^2
    int max_points = std::numeric_limits<int>::max();
    double residual_tol = 1e-12;  // guard on the max residual 2-norm
};

/// Per-iteration log of one greedy run.
struct GreedyTrace {
    std::vector<int> selected;          // dataset index chosen at each iteration
    std::vector<double> residual_norm;  // max residual 2-norm over unselected, before the pick
    std::vector<double> power_value;    // max candidate power value, before the pick
    std::string status;                 // power_tol | residual_tol | max_points | exhausted | breakdown
};

/// Incremental f-greedy state over a fixed candidate set. Maintains a Cholesky
/// factor of the regularized kernel matrix on the selected points, extended by
/// one row per iteration; predictions / residuals / power values update in
/// O(N (q + n)) per step without refactorizing.
class GreedyState {
public:
    GreedyState(const std::vector<double>& points, const Eigen::MatrixXd& values,
                const KernelConfig& kc);

    int iteration() const { return n_; }
    const std::vector<int>& selected() const { return selected_; }

    /// Residual 2-norm at a candidate (valid for unselected points).
    double residual_norm(int index) const;
    /// argmax of the residual norm over unselected candidates, lowest index on ties.
    int best_candidate() const;
    /// max candidate power value and max residual norm over unselected candidates.
    double max_power() const;
    double max_residual() const;

    /// Regularized power function P(x) >= 0 at a dataset candidate (O(1)) ...
    double power_value(int index) const;
    /// ... or at an arbitrary point (triangular solve, O(n^2)).
    double power_at(double x) const;

    /// True if the candidate can be added (positive Cholesky pivot).
    bool can_add(int index) const;
    void add_point(int index);

    /// Model on the selected centers (coefficients via one triangular solve).
    InterpolantModel finish() const;

private:
    const std::vector<double>& points_;
    const KernelConfig kc_;
    Eigen::MatrixXd newton_;     // N x n, regularized Newton basis values
    Eigen::MatrixXd residual_;   // N x q
    Eigen::MatrixXd beta_;       // n x q, forward-substituted data
    Eigen::VectorXd power2_;     // K(x,x) - sum_m newton(x,m)^2 per candidate
    std::vector<double> diag_;   // Cholesky diagonal per selected point
    std::vector<int> selected_;
    std::vector<char> is_selected_;
    int n_ = 0;
};

/// f-VKOGA: greedy center selection by maximal residual 2-norm with power-function
/// stopping. Returns a sparse model on the selected centers.
InterpolantModel vkoga_fit(const std::vector<double>& points, const Eigen::MatrixXd& values,
                           const KernelConfig& kc, const GreedyStopping& stop,
                           GreedyTrace* trace = nullptr);

struct CvSpec {
    int folds = 10;
    std::vector<double> shape_grid;          // eps values
    std::vector<double> regularization_grid; // lambda values
    uint64_t seed = 0;
    int greedy_cap = 200; // cap on selected points during grid search
    GreedyStopping stopping;
    int jobs = 1;

    static CvSpec default_grids(uint64_t seed);
};

struct CvResult {
    double best_shape = 0;
    double best_regularization = 0;
    Eigen::MatrixXd scores; // shape_grid.size() x regularization_grid.size(), mean max-abs error
    std::vector<int> fold_of; // fold index per data point
    InterpolantModel model;   // retrained on the full set with the best pair
    GreedyTrace trace;        // trace of the final full-set fit
};

/// k-fold cross validation over (eps, lambda); score is the fold-mean of the
/// maximum absolute (componentwise) held-out error. Deterministic for a fixed seed.
CvResult cross_validate(const std::vector<double>& points, const Eigen::MatrixXd& values,
                        const CvSpec& spec);

/// Training report: per-iteration greedy log plus the CV score table.
void write_training_report(const std::string& path, const CvSpec& spec, const CvResult& result);

} // namespace stenoflow
