#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stenoflow/errors.hpp"
#include "stenoflow/estimation.hpp"
#include "stenoflow/pipeline.hpp"

namespace py = pybind11;
using namespace stenoflow;

namespace {

Eigen::MatrixXd matrix_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw ConfigError("expected a 2-D array of shape (n, q)");
    Eigen::MatrixXd m(arr.shape(0), arr.shape(1));
    auto r = arr.unchecked<2>();
    for (py::ssize_t i = 0; i < arr.shape(0); ++i)
        for (py::ssize_t j = 0; j < arr.shape(1); ++j) m(i, j) = r(i, j);
    return m;
}

py::array_t<double> numpy_from_vector(const Eigen::VectorXd& v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::memcpy(out.mutable_data(), v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
    return out;
}

py::array_t<double> numpy_from_std(const std::vector<double>& v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::memcpy(out.mutable_data(), v.data(), sizeof(double) * v.size());
    return out;
}

std::vector<double> std_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 1) throw ConfigError("expected a 1-D array");
    return {arr.data(), arr.data() + arr.shape(0)};
}

/// Network + warm-up cache bundle: one full-model evaluator.
class FullModel {
public:
    explicit FullModel(const std::string& config_text_or_path, std::string cache_dir = "") {
        const bool looks_like_json = config_text_or_path.find('{') != std::string::npos;
        net_ = looks_like_json ? load_network(config_text_or_path)
                               : load_network_file(config_text_or_path);
        cache_ = std::make_unique<WarmupCache>(net_, std::move(cache_dir));
    }

    py::dict run(double degree) {
        const auto curves = run_full_model(net_, degree, *cache_);
        py::dict out;
        for (std::size_t m = 0; m < curves.size(); ++m) {
            py::dict per;
            per["pressure"] = numpy_from_std(curves[m].pressure);
            per["flow"] = numpy_from_std(curves[m].flow);
            out[py::str(net_.monitors[m].label)] = per;
        }
        return out;
    }

    std::vector<std::string> monitors() const {
        std::vector<std::string> out;
        for (const auto& m : net_.monitors) out.push_back(m.label);
        return out;
    }
    int q() const { return net_.protocol.q(); }
    double healthy_degree() const { return net_.protocol.healthy_degree; }
    std::string network_hash() const { return hash_hex(net_.content_hash()); }

private:
    NetworkTopology net_;
    std::unique_ptr<WarmupCache> cache_;
};

InterpolantModel train_binding(const std::vector<double>& x, const Eigen::MatrixXd& f, double shape,
                               double regularization, double power_tol, int max_points) {
    KernelConfig kc{KernelFamily::gaussian, shape, regularization};
    GreedyStopping stop;
    stop.power_tol = power_tol;
    if (max_points > 0) stop.max_points = max_points;
    return vkoga_fit(x, f, kc, stop);
}

py::tuple cross_validate_binding(const std::vector<double>& x, const Eigen::MatrixXd& f, int folds,
                                 const std::vector<double>& eps_grid,
                                 const std::vector<double>& lam_grid, uint64_t seed, int jobs) {
    CvSpec spec;
    spec.folds = folds;
    spec.shape_grid = eps_grid.empty() ? CvSpec::default_grids(seed).shape_grid : eps_grid;
    spec.regularization_grid =
        lam_grid.empty() ? CvSpec::default_grids(seed).regularization_grid : lam_grid;
    spec.seed = seed;
    spec.jobs = jobs;
    CvResult res = cross_validate(x, f, spec);
    return py::make_tuple(res.model, res.best_shape, res.best_regularization);
}

py::dict estimate_binding(const py::array_t<double, py::array::c_style | py::array::forcecast>& y,
                          const InterpolantModel& model, bool with_scan) {
    const EstimationResult r = estimate(std_from_numpy(y), model, {}, with_scan);
    py::dict out;
    out["degree"] = r.degree;
    out["cost"] = r.cost_value;
    out["iterations"] = r.iterations;
    out["converged"] = r.converged;
    return out;
}

} // namespace

PYBIND11_MODULE(_stenoflow_core, m) {
    m.doc() = "1-D arterial network simulation with sparse kernel surrogates";

    py::register_exception<ConfigError>(m, "StenoflowConfigError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "StenoflowNumericalError", PyExc_ArithmeticError);
    py::register_exception<MissingArtifactError>(m, "StenoflowMissingArtifact", PyExc_FileNotFoundError);

    py::class_<FullModel>(m, "FullModel")
        .def(py::init<const std::string&, std::string>(), py::arg("config"), py::arg("cache_dir") = "")
        .def("run", &FullModel::run, py::arg("degree"),
             "Run the snapshot protocol for one stenosis degree; returns per-monitor curves")
        .def_property_readonly("monitors", &FullModel::monitors)
        .def_property_readonly("q", &FullModel::q)
        .def_property_readonly("healthy_degree", &FullModel::healthy_degree)
        .def_property_readonly("network_hash", &FullModel::network_hash);

    py::class_<InterpolantModel>(m, "SurrogateModel")
        .def_property_readonly("centers", [](const InterpolantModel& s) { return s.centers; })
        .def_property_readonly("output_dim", [](const InterpolantModel& s) { return s.output_dim; })
        .def_property_readonly("shape", [](const InterpolantModel& s) { return s.kernel.shape; })
        .def_property_readonly("regularization",
                               [](const InterpolantModel& s) { return s.kernel.regularization; })
        .def_property_readonly("meta", [](const InterpolantModel& s) { return s.meta; })
        .def("evaluate", [](const InterpolantModel& s, double x) { return numpy_from_vector(s.evaluate(x)); },
             py::arg("degree"))
        .def("derivative",
             [](const InterpolantModel& s, double x) { return numpy_from_vector(s.evaluate_derivative(x)); },
             py::arg("degree"))
        .def("save", &InterpolantModel::save, py::arg("path"))
        .def_static("load", &InterpolantModel::load, py::arg("path"));

    m.def("train",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& f, double shape,
             double regularization, double power_tol, int max_points) {
              return train_binding(std_from_numpy(x), matrix_from_numpy(f), shape, regularization,
                                   power_tol, max_points);
          },
          py::arg("x"), py::arg("f"), py::arg("shape") = 1.0, py::arg("regularization") = 0.0,
          py::arg("power_tol") = 5e-8, py::arg("max_points") = 0,
          "Sparse greedy surrogate fit (gaussian kernel, f-greedy selection)");

    m.def("cross_validate",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& f, int folds,
             const std::vector<double>& eps_grid, const std::vector<double>& lam_grid,
             uint64_t seed, int jobs) {
              return cross_validate_binding(std_from_numpy(x), matrix_from_numpy(f), folds, eps_grid,
                                            lam_grid, seed, jobs);
          },
          py::arg("x"), py::arg("f"), py::arg("folds") = 10,
          py::arg("eps_grid") = std::vector<double>{}, py::arg("lam_grid") = std::vector<double>{},
          py::arg("seed") = 0, py::arg("jobs") = 1,
          "k-fold grid search over (shape, regularization); returns (model, shape, regularization)");

    m.def("cost",
          [](double degree, const py::array_t<double, py::array::c_style | py::array::forcecast>& y,
             const InterpolantModel& model) { return cost(degree, std_from_numpy(y), model); },
          py::arg("degree"), py::arg("y"), py::arg("model"));
    m.def("cost_gradient",
          [](double degree, const py::array_t<double, py::array::c_style | py::array::forcecast>& y,
             const InterpolantModel& model) { return cost_gradient(degree, std_from_numpy(y), model); },
          py::arg("degree"), py::arg("y"), py::arg("model"));
    m.def("estimate", &estimate_binding, py::arg("y"), py::arg("model"), py::arg("scan") = false,
          "Estimate the stenosis degree from a measured curve");

    m.def("synth_measurement",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& ref,
             double true_degree, double sigma, uint64_t seed) {
              return numpy_from_std(synth_measurement(std_from_numpy(ref), true_degree, sigma, seed).values);
          },
          py::arg("reference"), py::arg("true_degree"), py::arg("sigma"), py::arg("seed"),
          "y = f(R*) + sigma * v with v ~ U(0,1) componentwise");

    m.def("pulsatility_index",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& curve) {
              return pulsatility_index(std_from_numpy(curve));
          },
          py::arg("curve"), "(max - min) / mean of a curve");

    m.attr("__version__") = "1.0.0";
}
