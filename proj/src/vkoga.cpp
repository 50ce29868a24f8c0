#include "stenoflow/vkoga.hpp"
#include "stenoflow/errors.hpp"
#include "stenoflow/util.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <sstream>
#include <thread>

namespace stenoflow {

GreedyState::GreedyState(const std::vector<double>& points, const Eigen::MatrixXd& values,
                         const KernelConfig& kc)
    : points_(points), kc_(kc) {
    const auto n = static_cast<Eigen::Index>(points.size());
    if (n == 0) throw ConfigError("greedy training: empty dataset");
    if (values.rows() != n) throw ConfigError("greedy training: point/value count mismatch");
    residual_ = values;
    newton_.resize(n, 0);
    beta_.resize(0, values.cols());
    power2_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        power2_[i] = kernel_eval(kc, points[static_cast<std::size_t>(i)],
                                 points[static_cast<std::size_t>(i)]);
    is_selected_.assign(points.size(), 0);
}

double GreedyState::residual_norm(int index) const {
    return residual_.row(index).norm();
}

int GreedyState::best_candidate() const {
    int best = -1;
    double best_norm = -1.0;
    for (int i = 0; i < static_cast<int>(points_.size()); ++i) {
        if (is_selected_[static_cast<std::size_t>(i)]) continue;
        const double r = residual_norm(i);
        if (r > best_norm) {
            best_norm = r;
            best = i;
        }
    }
    return best;
}

double GreedyState::power_value(int index) const {
    const double p2 = power2_[index];
    if (p2 < -1e-12)
        throw NumericalError("power function numerical breakdown: P^2 = " + format_double(p2) +
                             " at candidate " + std::to_string(index));
    return std::sqrt(std::max(p2, 0.0));
}

double GreedyState::max_power() const {
    double m = 0.0;
    for (int i = 0; i < static_cast<int>(points_.size()); ++i)
        if (!is_selected_[static_cast<std::size_t>(i)]) m = std::max(m, power_value(i));
    return m;
}

double GreedyState::max_residual() const {
    double m = 0.0;
    for (int i = 0; i < static_cast<int>(points_.size()); ++i)
        if (!is_selected_[static_cast<std::size_t>(i)]) m = std::max(m, residual_norm(i));
    return m;
}

double GreedyState::power_at(double x) const {
    // forward substitution of k(x) through the stored Cholesky rows
    Eigen::VectorXd u(n_);
    for (int m = 0; m < n_; ++m) {
        double s = kernel_eval(kc_, x, points_[static_cast<std::size_t>(selected_[m])]);
        for (int t = 0; t < m; ++t) s -= newton_(selected_[m], t) * u[t];
        u[m] = s / diag_[m];
    }
    const double p2 = kernel_eval(kc_, x, x) - u.squaredNorm();
    if (p2 < -1e-12)
        throw NumericalError("power function numerical breakdown at x = " + format_double(x));
    return std::sqrt(std::max(p2, 0.0));
}

bool GreedyState::can_add(int index) const {
    return power2_[index] + kc_.regularization > 0.0;
}

void GreedyState::add_point(int index) {
    if (is_selected_[static_cast<std::size_t>(index)])
        throw ConfigError("greedy training: candidate already selected");
    const int m = n_;
    const double pivot2 = power2_[index] + kc_.regularization;
    if (!(pivot2 > 0))
        throw NumericalError("greedy training: non-positive Cholesky pivot at candidate " +
                             std::to_string(index));
    const double diag = std::sqrt(pivot2);

    if (newton_.cols() <= m) {
        const Eigen::Index grow = std::max<Eigen::Index>(8, newton_.cols() * 2);
        newton_.conservativeResize(Eigen::NoChange, std::min<Eigen::Index>(grow, residual_.rows()));
        beta_.conservativeResize(newton_.cols(), Eigen::NoChange);
    }

    // new regularized Newton-basis column
    const auto n = static_cast<Eigen::Index>(points_.size());
    Eigen::VectorXd col(n);
    for (Eigen::Index i = 0; i < n; ++i)
        col[i] = kernel_eval(kc_, points_[static_cast<std::size_t>(i)],
                             points_[static_cast<std::size_t>(index)]);
    if (m > 0)
        col.noalias() -= newton_.leftCols(m) * newton_.row(index).head(m).transpose();
    col /= diag;

    // beta row comes straight from the residual at the new center
    beta_.row(m) = residual_.row(index) / diag;
    residual_.noalias() -= col * beta_.row(m);
    power2_.array() -= col.array().square();
    newton_.col(m) = col;
    diag_.push_back(diag);
    selected_.push_back(index);
    is_selected_[static_cast<std::size_t>(index)] = 1;
    ++n_;
}

InterpolantModel GreedyState::finish() const {
    InterpolantModel model;
    model.kernel = kc_;
    model.output_dim = static_cast<int>(residual_.cols());
    model.centers.reserve(static_cast<std::size_t>(n_));
    for (int m = 0; m < n_; ++m)
        model.centers.push_back(points_[static_cast<std::size_t>(selected_[m])]);
    // back substitution alpha = L^{-T} beta; row t of L is newton_(selected_[t], :)
    Eigen::MatrixXd alpha(n_, residual_.cols());
    for (int m = n_ - 1; m >= 0; --m) {
        Eigen::RowVectorXd row = beta_.row(m);
        for (int t = m + 1; t < n_; ++t) row.noalias() -= newton_(selected_[t], m) * alpha.row(t);
        alpha.row(m) = row / diag_[m];
    }
    model.coefficients = alpha;
    return model;
}

InterpolantModel vkoga_fit(const std::vector<double>& points, const Eigen::MatrixXd& values,
                           const KernelConfig& kc, const GreedyStopping& stop,
                           GreedyTrace* trace) {
    if (points.empty()) throw ConfigError("vkoga_fit: empty dataset");
    {
        std::vector<double> sorted = points;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw ConfigError("vkoga_fit: data points must be pairwise distinct");
    }

    GreedyState state(points, values, kc);
    const int n_max = std::min<int>(stop.max_points, static_cast<int>(points.size()));
    std::string status = "exhausted";
    while (true) {
        if (state.iteration() >= n_max) {
            status = state.iteration() == static_cast<int>(points.size()) ? "exhausted" : "max_points";
            break;
        }
        double max_p;
        try {
            max_p = state.max_power();
        } catch (const NumericalError&) {
            status = "breakdown"; // power value went negative beyond roundoff
            break;
        }
        if (max_p * max_p < stop.power_tol) {
            // tolerance acts on the squared power value (the Cholesky pivot)
            status = "power_tol";
            break;
        }
        const double max_r = state.max_residual();
        if (max_r < stop.residual_tol) {
            status = "residual_tol";
            break;
        }
        const int pick = state.best_candidate();
        if (pick < 0 || !state.can_add(pick)) {
            status = "breakdown";
            break;
        }
        if (trace) {
            trace->selected.push_back(pick);
            trace->residual_norm.push_back(state.residual_norm(pick));
            trace->power_value.push_back(state.power_value(pick));
        }
        state.add_point(pick);
    }
    if (trace) trace->status = status;
    return state.finish();
}

CvSpec CvSpec::default_grids(uint64_t seed) {
    CvSpec spec;
    spec.folds = 10;
    spec.shape_grid = log_spaced(1e-2, 50.0, 20);
    spec.regularization_grid = log_spaced(1e-16, 1e-2, 15);
    spec.seed = seed;
    return spec;
}

namespace {

double max_abs_error(const InterpolantModel& model, const std::vector<double>& xs,
                     const Eigen::MatrixXd& values, const std::vector<int>& rows) {
    double m = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const Eigen::VectorXd pred = model.evaluate(xs[i]);
        m = std::max(m, (pred - values.row(rows[i]).transpose()).lpNorm<Eigen::Infinity>());
    }
    return m;
}

} // namespace

CvResult cross_validate(const std::vector<double>& points, const Eigen::MatrixXd& values,
                        const CvSpec& spec) {
    const int n = static_cast<int>(points.size());
    if (spec.folds < 2) throw ConfigError("cross_validate: need at least 2 folds");
    if (n < spec.folds)
        throw ConfigError("cross_validate: dataset size " + std::to_string(n) +
                          " smaller than fold count " + std::to_string(spec.folds));
    if (spec.shape_grid.empty() || spec.regularization_grid.empty())
        throw ConfigError("cross_validate: parameter grids must be non-empty");

    CvResult result;
    result.fold_of.assign(static_cast<std::size_t>(n), -1);
    {
        Rng rng(spec.seed);
        const std::vector<int> perm = rng.permutation(n);
        const int base = n / spec.folds, rem = n % spec.folds;
        int pos = 0;
        for (int f = 0; f < spec.folds; ++f) {
            const int size = base + (f < rem ? 1 : 0);
            if (size == 0) throw ConfigError("cross_validate: empty fold");
            for (int i = 0; i < size; ++i) result.fold_of[static_cast<std::size_t>(perm[pos++])] = f;
        }
    }

    const auto n_eps = static_cast<Eigen::Index>(spec.shape_grid.size());
    const auto n_lam = static_cast<Eigen::Index>(spec.regularization_grid.size());
    result.scores.resize(n_eps, n_lam);

    auto run_cell = [&](Eigen::Index ei, Eigen::Index li) {
        KernelConfig kc;
        kc.family = KernelFamily::gaussian;
        kc.shape = spec.shape_grid[static_cast<std::size_t>(ei)];
        kc.regularization = spec.regularization_grid[static_cast<std::size_t>(li)];
        double score = 0.0;
        for (int f = 0; f < spec.folds; ++f) {
            std::vector<double> train_x, test_x;
            std::vector<int> train_rows, test_rows;
            for (int i = 0; i < n; ++i) {
                if (result.fold_of[static_cast<std::size_t>(i)] == f) {
                    test_x.push_back(points[static_cast<std::size_t>(i)]);
                    test_rows.push_back(i);
                } else {
                    train_x.push_back(points[static_cast<std::size_t>(i)]);
                    train_rows.push_back(i);
                }
            }
            Eigen::MatrixXd train_f(train_x.size(), values.cols());
            for (std::size_t r = 0; r < train_rows.size(); ++r)
                train_f.row(static_cast<Eigen::Index>(r)) = values.row(train_rows[r]);
            GreedyStopping stop = spec.stopping;
            stop.max_points = std::min<int>(spec.greedy_cap, static_cast<int>(train_x.size()));
            const InterpolantModel m = vkoga_fit(train_x, train_f, kc, stop);
            score += max_abs_error(m, test_x, values, test_rows);
        }
        result.scores(ei, li) = score / spec.folds;
    };

    const Eigen::Index cells = n_eps * n_lam;
    const int jobs = std::max(1, spec.jobs);
    if (jobs == 1) {
        for (Eigen::Index c = 0; c < cells; ++c) run_cell(c / n_lam, c % n_lam);
    } else {
        std::vector<std::thread> pool;
        std::atomic<Eigen::Index> next{0};
        for (int w = 0; w < jobs; ++w)
            pool.emplace_back([&] {
                for (Eigen::Index c = next++; c < cells; c = next++) run_cell(c / n_lam, c % n_lam);
            });
        for (auto& th : pool) th.join();
    }

    Eigen::Index best_e = 0, best_l = 0;
    double best = result.scores(0, 0);
    for (Eigen::Index ei = 0; ei < n_eps; ++ei)
        for (Eigen::Index li = 0; li < n_lam; ++li)
            if (result.scores(ei, li) < best) {
                best = result.scores(ei, li);
                best_e = ei;
                best_l = li;
            }
    result.best_shape = spec.shape_grid[static_cast<std::size_t>(best_e)];
    result.best_regularization = spec.regularization_grid[static_cast<std::size_t>(best_l)];

    KernelConfig kc;
    kc.family = KernelFamily::gaussian;
    kc.shape = result.best_shape;
    kc.regularization = result.best_regularization;
    GreedyStopping stop = spec.stopping; // full rule for the final fit
    stop.max_points = n;
    result.model = vkoga_fit(points, values, kc, stop, &result.trace);
    return result;
}

void write_training_report(const std::string& path, const CvSpec& spec, const CvResult& result) {
    std::ostringstream os;
    os << "stenoflow-training-report 1\n";
    os << "seed " << spec.seed << "\n";
    os << "folds " << spec.folds << "\n";
    os << "selected shape=" << format_double(result.best_shape)
       << " regularization=" << format_double(result.best_regularization) << "\n";
    os << "selected-centers " << result.model.centers.size() << "\n";
    os << "cv-scores shape,regularization,mean_max_abs_error\n";
    for (Eigen::Index ei = 0; ei < result.scores.rows(); ++ei)
        for (Eigen::Index li = 0; li < result.scores.cols(); ++li)
            os << format_double(spec.shape_grid[static_cast<std::size_t>(ei)]) << ","
               << format_double(spec.regularization_grid[static_cast<std::size_t>(li)]) << ","
               << format_double(result.scores(ei, li)) << "\n";
    os << "greedy-trace status=" << result.trace.status
       << " iteration,selected_index,residual_norm,power_value\n";
    for (std::size_t i = 0; i < result.trace.selected.size(); ++i)
        os << i << "," << result.trace.selected[i] << ","
           << format_double(result.trace.residual_norm[i]) << ","
           << format_double(result.trace.power_value[i]) << "\n";
    write_text_file(path, os.str());
}

} // namespace stenoflow
