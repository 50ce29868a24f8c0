#include "stenoflow/kernel.hpp"
#include "stenoflow/errors.hpp"
#include "stenoflow/util.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace stenoflow {

std::string kernel_family_name(KernelFamily f) {
    switch (f) {
    case KernelFamily::gaussian: return "gaussian";
    case KernelFamily::wendland_c2: return "wendland_c2";
    case KernelFamily::wendland_c0: return "wendland_c0";
    }
    throw ConfigError("unknown kernel family");
}

KernelFamily kernel_family_from_name(const std::string& name) {
    if (name == "gaussian") return KernelFamily::gaussian;
    if (name == "wendland_c2") return KernelFamily::wendland_c2;
    if (name == "wendland_c0") return KernelFamily::wendland_c0;
    throw ConfigError("unknown kernel family '" + name + "'");
}

double kernel_eval(const KernelConfig& kc, double x, double y) {
    const double r = kc.shape * std::abs(x - y);
    switch (kc.family) {
    case KernelFamily::gaussian:
        return std::exp(-r * r);
    case KernelFamily::wendland_c2: {
        const double u = 1.0 - r;
        return r >= 1.0 ? 0.0 : u * u * u * (3.0 * r + 1.0);
    }
    case KernelFamily::wendland_c0:
        return r >= 1.0 ? 0.0 : 1.0 - r;
    }
    throw ConfigError("unknown kernel family");
}

double kernel_derivative_x(const KernelConfig& kc, double x, double y) {
    const double d = x - y;
    const double r = kc.shape * std::abs(d);
    const double sgn = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
    switch (kc.family) {
    case KernelFamily::gaussian:
        return -2.0 * kc.shape * kc.shape * d * std::exp(-r * r);
    case KernelFamily::wendland_c2: {
        if (r >= 1.0) return 0.0;
        const double u = 1.0 - r;
        // dphi/dr = -12 r (1-r)^2, zero at both r = 0 and r = 1
        return -12.0 * r * u * u * kc.shape * sgn;
    }
    case KernelFamily::wendland_c0:
        if (r == 0.0 || r == 1.0)
            throw NumericalError("wendland_c0 kernel is not differentiable at r = " +
                                 format_double(r));
        return r > 1.0 ? 0.0 : -kc.shape * sgn;
    }
    throw ConfigError("unknown kernel family");
}

Eigen::MatrixXd kernel_matrix(const std::vector<double>& points, const KernelConfig& kc) {
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        a(i, i) = kernel_eval(kc, points[i], points[i]);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = kernel_eval(kc, points[i], points[j]);
            a(i, j) = v;
            a(j, i) = v;
        }
    }
    return a;
}

Eigen::VectorXd InterpolantModel::evaluate(double x) const {
    const auto n = static_cast<Eigen::Index>(centers.size());
    if (n == 0) return Eigen::VectorXd::Zero(output_dim);
    Eigen::VectorXd kv(n);
    for (Eigen::Index j = 0; j < n; ++j) kv[j] = kernel_eval(kernel, x, centers[static_cast<std::size_t>(j)]);
    return coefficients.transpose() * kv;
}

Eigen::VectorXd InterpolantModel::evaluate_derivative(double x) const {
    const auto n = static_cast<Eigen::Index>(centers.size());
    if (n == 0) return Eigen::VectorXd::Zero(output_dim);
    Eigen::VectorXd kv(n);
    for (Eigen::Index j = 0; j < n; ++j)
        kv[j] = kernel_derivative_x(kernel, x, centers[static_cast<std::size_t>(j)]);
    return coefficients.transpose() * kv;
}

InterpolantModel fit_interpolant(const std::vector<double>& points, const Eigen::MatrixXd& values,
                                 const KernelConfig& kc) {
    const auto n = static_cast<Eigen::Index>(points.size());
    if (n == 0) throw ConfigError("fit_interpolant: empty point set");
    if (values.rows() != n)
        throw ConfigError("fit_interpolant: value rows (" + std::to_string(values.rows()) +
                          ") do not match point count (" + std::to_string(points.size()) + ")");
    if (!(kc.shape > 0)) throw ConfigError("kernel shape parameter must be > 0");
    if (kc.regularization < 0) throw ConfigError("kernel regularization must be >= 0");

    const Eigen::MatrixXd a = kernel_matrix(points, kc);
    auto factor = [&](double lambda) {
        Eigen::MatrixXd m = a;
        m.diagonal().array() += lambda;
        return Eigen::LLT<Eigen::MatrixXd>(m);
    };

    auto solve_checked = [&](double lambda, Eigen::MatrixXd& out) {
        const Eigen::LLT<Eigen::MatrixXd> llt = factor(lambda);
        if (llt.info() != Eigen::Success) return false;
        Eigen::MatrixXd m = a;
        m.diagonal().array() += lambda;
        out = llt.solve(values);
        // one refinement pass, then verify the factorization actually solved the system
        out += llt.solve(values - m * out);
        if (!out.allFinite()) return false;
        const double resid = (m * out - values).norm();
        return resid <= 1e-8 * std::max(1.0, values.norm());
    };

    InterpolantModel model;
    model.kernel = kc;
    model.centers = points;
    model.output_dim = static_cast<int>(values.cols());
    if (solve_checked(kc.regularization, model.coefficients)) return model;
    const double bumped = std::max(kc.regularization, 1e-12 * a.trace() / static_cast<double>(n));
    if (solve_checked(bumped, model.coefficients)) return model;

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    throw NumericalError(
        "kernel matrix factorization failed (numerically indefinite); eigenvalue range [" +
        format_double(lo) + ", " + format_double(hi) + "], condition estimate " +
        format_double(lo > 0 ? hi / lo : std::numeric_limits<double>::infinity()));
}

// --- model file (structured text; centers/coefficients bit-exact via hex floats) ---

void InterpolantModel::save(const std::string& path) const {
    std::ostringstream os;
    os << "stenoflow-model 1\n";
    os << "kernel " << kernel_family_name(kernel.family) << "\n";
    os << "shape " << format_hex(kernel.shape) << "\n";
    os << "regularization " << format_hex(kernel.regularization) << "\n";
    os << "outputs " << output_dim << "\n";
    os << "centers " << centers.size() << "\n";
    for (const auto& [k, v] : meta) os << "meta " << k << " " << v << "\n";
    os << "data\n";
    for (std::size_t j = 0; j < centers.size(); ++j) {
        os << format_hex(centers[j]);
        for (Eigen::Index c = 0; c < coefficients.cols(); ++c)
            os << " " << format_hex(coefficients(static_cast<Eigen::Index>(j), c));
        os << "\n";
    }
    write_text_file(path, os.str());
}

InterpolantModel InterpolantModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("cannot open model file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "stenoflow-model 1")
        throw MissingArtifactError("model file " + path + " has unsupported version header '" +
                                   line + "'");
    InterpolantModel m;
    std::size_t n_centers = 0;
    while (std::getline(in, line)) {
        if (line == "data") break;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "kernel") {
            std::string fam;
            ls >> fam;
            m.kernel.family = kernel_family_from_name(fam);
        } else if (key == "shape") {
            std::string v;
            ls >> v;
            m.kernel.shape = parse_double(v);
        } else if (key == "regularization") {
            std::string v;
            ls >> v;
            m.kernel.regularization = parse_double(v);
        } else if (key == "outputs") {
            ls >> m.output_dim;
        } else if (key == "centers") {
            ls >> n_centers;
        } else if (key == "meta") {
            std::string k;
            ls >> k;
            std::string rest;
            std::getline(ls, rest);
            if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
            m.meta[k] = rest;
        } else {
            throw MissingArtifactError("model file " + path + ": unknown header key '" + key + "'");
        }
    }
    m.centers.reserve(n_centers);
    m.coefficients.resize(static_cast<Eigen::Index>(n_centers), m.output_dim);
    for (std::size_t j = 0; j < n_centers; ++j) {
        if (!std::getline(in, line))
            throw MissingArtifactError("model file " + path + " truncated");
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        m.centers.push_back(parse_double(tok));
        for (Eigen::Index c = 0; c < m.output_dim; ++c) {
            ls >> tok;
            m.coefficients(static_cast<Eigen::Index>(j), c) = parse_double(tok);
        }
    }
    return m;
}

} // namespace stenoflow
