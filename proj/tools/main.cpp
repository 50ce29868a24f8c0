#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "stenoflow/errors.hpp"
#include "stenoflow/estimation.hpp"
#include "stenoflow/pipeline.hpp"

using namespace stenoflow;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string resolve_config(const std::string& path) {
    if (fs::exists(path)) return path;
    if (const char* dir = std::getenv("STENOFLOW_CONFIG_DIR")) {
        const fs::path candidate = fs::path(dir) / path;
        if (fs::exists(candidate)) return candidate.string();
    }
    throw MissingArtifactError("network config not found: " + path);
}

std::string sanitize(const std::string& label) {
    std::string out = label;
    for (char& c : out)
        if (c == ':' || c == '/' || c == ' ') c = '-';
    return out;
}

/// Every command leaves a manifest naming its inputs and outputs with content
/// hashes, so any pipeline artifact can be traced back to the run that made it.
class Manifest {
public:
    Manifest(std::string command, int argc, char** argv) : command_(std::move(command)) {
        for (int i = 0; i < argc; ++i) argv_.push_back(argv[i]);
    }
    void input(const std::string& path) { inputs_[path] = hash_hex(hash_file_bytes(path)); }
    void output(const std::string& path) { outputs_[path] = hash_hex(hash_file_bytes(path)); }
    void note(const std::string& key, const std::string& value) { notes_[key] = value; }

    void write(const fs::path& path) const {
        nlohmann::json j;
        j["tool"] = "stenoflow";
        j["version"] = kVersion;
        j["command"] = command_;
        j["argv"] = argv_;
        j["timestamp"] = static_cast<long>(
            std::chrono::duration_cast<std::chrono::seconds>(
                std::chrono::system_clock::now().time_since_epoch()).count());
        j["inputs"] = inputs_;
        j["outputs"] = outputs_;
        for (const auto& [k, v] : notes_) j[k] = v;
        write_text_file(path.string(), j.dump(2) + "\n");
    }

private:
    std::string command_;
    std::vector<std::string> argv_;
    std::map<std::string, std::string> inputs_, outputs_, notes_;
};

std::vector<InterpolantModel> load_models_dir(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".model") files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw MissingArtifactError("no .model files in " + dir);
    std::vector<InterpolantModel> models;
    for (const auto& f : files) models.push_back(InterpolantModel::load(f));
    return models;
}

int run(int argc, char** argv) {
    CLI::App app{"1-D arterial network simulator with kernel surrogates for stenosis curves"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string network_file, out_dir = ".", cache_dir, dataset_file, model_file;
    std::string models_dir, reference_file, measurement_file, out_file;
    double rs = 0.5, sigma = 0.0, true_rs = -1.0;
    std::vector<int> sizes;
    int test_size = 0, jobs = 1, folds = 10, repeats = 100, inputs = 1000;
    int cv_cap = 200;
    uint64_t seed = 0;
    std::vector<double> degrees;
    double eps_lo = 1e-2, eps_hi = 50.0, lam_lo = 1e-16, lam_hi = 1e-2;
    int eps_n = 20, lam_n = 15;
    bool with_scan = false;
    std::string monitor_filter, quantity_filter;

    auto* sim = app.add_subcommand("simulate", "run the full model once and write curve files");
    sim->add_option("--network", network_file, "network config file")->required();
    sim->add_option("--rs", rs, "stenosis degree in [healthy, 1]")->required();
    sim->add_option("--out", out_dir, "output directory");
    sim->add_option("--cache-dir", cache_dir, "warm-up cache directory");

    auto* snap = app.add_subcommand("snapshot", "build snapshot datasets over equispaced degrees");
    snap->add_option("--network", network_file)->required();
    snap->add_option("--sizes", sizes, "training set sizes, e.g. 5 10 20");
    snap->add_option("--degrees", degrees, "explicit degree list (one extra dataset)");
    snap->add_option("--test", test_size, "also build a test dataset of this size");
    snap->add_option("--out", out_dir);
    snap->add_option("--jobs", jobs, "concurrent snapshot runs");
    snap->add_option("--cache-dir", cache_dir);

    auto* train = app.add_subcommand("train", "cross-validate and train surrogates from a dataset");
    train->add_option("--dataset", dataset_file)->required();
    train->add_option("--out", out_dir);
    train->add_option("--folds", folds);
    train->add_option("--seed", seed);
    train->add_option("--monitor", monitor_filter, "train only this monitor label");
    train->add_option("--quantity", quantity_filter, "train only pressure or flow");
    train->add_option("--eps-lo", eps_lo);
    train->add_option("--eps-hi", eps_hi);
    train->add_option("--eps-n", eps_n);
    train->add_option("--lam-lo", lam_lo);
    train->add_option("--lam-hi", lam_hi);
    train->add_option("--lam-n", lam_n);
    train->add_option("--cap", cv_cap, "greedy cap during grid search");
    train->add_option("--jobs", jobs);

    auto* eval = app.add_subcommand("eval", "evaluate surrogates against a reference dataset");
    eval->add_option("--models-dir", models_dir)->required();
    eval->add_option("--reference", reference_file, "reference dataset file")->required();
    eval->add_option("--out", out_file, "error report file")->required();
    eval->add_option("--repeats", repeats);

    auto* pred = app.add_subcommand("predict", "evaluate one surrogate at a stenosis degree");
    pred->add_option("--model", model_file)->required();
    pred->add_option("--rs", rs)->required();
    pred->add_option("--out", out_file)->required();

    auto* est = app.add_subcommand("estimate", "estimate the stenosis degree from a measured curve");
    est->add_option("--model", model_file)->required();
    est->add_option("--measurement", measurement_file, "measured curve file");
    est->add_option("--reference", reference_file, "reference curve to synthesize noise onto");
    est->add_option("--sigma", sigma, "noise level for synthetic measurements");
    est->add_option("--seed", seed);
    est->add_option("--true-rs", true_rs, "true degree, for error reporting");
    est->add_flag("--scan", with_scan, "dense 1001-point scan cross-check");
    est->add_option("--out", out_file)->required();

    auto* bench = app.add_subcommand("bench", "time surrogate evaluation (and optionally one full run)");
    bench->add_option("--model", model_file)->required();
    bench->add_option("--inputs", inputs);
    bench->add_option("--repeats", repeats);
    bench->add_option("--network", network_file, "also time one full-model run");
    bench->add_option("--cache-dir", cache_dir);
    bench->add_option("--out", out_file, "timing table file")->required();

    CLI11_PARSE(app, argc, argv);

    if (sim->parsed()) {
        const std::string cfg = resolve_config(network_file);
        const NetworkTopology net = load_network_file(cfg);
        WarmupCache cache(net, cache_dir);
        const auto curves = run_full_model(net, rs, cache);
        fs::create_directories(out_dir);
        Manifest manifest("simulate", argc, argv);
        manifest.input(cfg);
        manifest.note("rs", format_double(rs));
        for (std::size_t m = 0; m < curves.size(); ++m) {
            const std::string label = sanitize(net.monitors[m].label);
            const std::string ctx_base = "monitor " + net.monitors[m].label + " rs " + format_double(rs);
            const std::string pfile = (fs::path(out_dir) / ("curve_" + label + "_pressure.csv")).string();
            const std::string ffile = (fs::path(out_dir) / ("curve_" + label + "_flow.csv")).string();
            save_curve(pfile, curves[m].pressure, net.protocol.record_start,
                       net.protocol.sample_rate, "mmHg", ctx_base + " quantity pressure");
            save_curve(ffile, curves[m].flow, net.protocol.record_start, net.protocol.sample_rate,
                       "cm^3/s", ctx_base + " quantity flow");
            manifest.output(pfile);
            manifest.output(ffile);
        }
        manifest.write(fs::path(out_dir) / "manifest_simulate.json");
        std::cout << "wrote " << 2 * curves.size() << " curve files to " << out_dir << "\n";
        return 0;
    }

    if (snap->parsed()) {
        const std::string cfg = resolve_config(network_file);
        const NetworkTopology net = load_network_file(cfg);
        WarmupCache cache(net, cache_dir);
        fs::create_directories(out_dir);
        Manifest manifest("snapshot", argc, argv);
        manifest.input(cfg);
        auto build_and_save = [&](const std::vector<double>& grid, const std::string& name) {
            const SnapshotDataset ds = build_dataset(net, grid, cache, jobs);
            const std::string path = (fs::path(out_dir) / name).string();
            save_dataset(path, ds);
            manifest.output(path);
            std::cout << "wrote " << path << " (" << grid.size() << " inputs)\n";
        };
        for (const int n : sizes)
            build_and_save(equispaced_degrees(n, net.protocol.healthy_degree),
                           "train_N" + std::to_string(n) + ".dataset");
        if (!degrees.empty()) build_and_save(degrees, "custom.dataset");
        if (test_size > 0)
            build_and_save(equispaced_degrees(test_size, net.protocol.healthy_degree),
                           "test_N" + std::to_string(test_size) + ".dataset");
        manifest.write(fs::path(out_dir) / "manifest_snapshot.json");
        return 0;
    }

    if (train->parsed()) {
        const SnapshotDataset ds = load_dataset(dataset_file);
        CvSpec spec;
        spec.folds = folds;
        spec.seed = seed;
        spec.shape_grid = log_spaced(eps_lo, eps_hi, eps_n);
        spec.regularization_grid = log_spaced(lam_lo, lam_hi, lam_n);
        spec.greedy_cap = cv_cap;
        spec.jobs = jobs;
        fs::create_directories(out_dir);
        Manifest manifest("train", argc, argv);
        manifest.input(dataset_file);
        manifest.note("seed", std::to_string(seed));
        for (std::size_t m = 0; m < ds.monitor_labels.size(); ++m) {
            if (!monitor_filter.empty() && ds.monitor_labels[m] != monitor_filter) continue;
            for (int k = 0; k < 2; ++k) {
                const std::string qname = SnapshotDataset::quantity_name(k);
                if (!quantity_filter.empty() && qname != quantity_filter) continue;
                CvResult res = cross_validate(ds.inputs, ds.outputs[m][static_cast<std::size_t>(k)], spec);
                InterpolantModel model = std::move(res.model);
                model.meta["monitor"] = ds.monitor_labels[m];
                model.meta["quantity"] = qname;
                model.meta["dataset-size"] = std::to_string(ds.inputs.size());
                model.meta["network-hash"] = hash_hex(ds.network_hash);
                model.meta["seed"] = std::to_string(seed);
                model.meta["window-start"] = format_double(ds.protocol.record_start);
                model.meta["sample-rate"] = std::to_string(ds.protocol.sample_rate);
                model.meta["unit"] = k == 0 ? "mmHg" : "cm^3/s";
                const std::string base = sanitize(ds.monitor_labels[m]) + "_" + qname;
                const std::string mpath = (fs::path(out_dir) / (base + ".model")).string();
                const std::string rpath = (fs::path(out_dir) / (base + ".training.txt")).string();
                model.save(mpath);
                write_training_report(rpath, spec, res);
                manifest.output(mpath);
                manifest.output(rpath);
                std::cout << "trained " << base << ": " << model.centers.size() << " centers, eps="
                          << format_double(res.best_shape)
                          << " lambda=" << format_double(res.best_regularization) << "\n";
            }
        }
        manifest.write(fs::path(out_dir) / "manifest_train.json");
        return 0;
    }

    if (eval->parsed()) {
        const auto models = load_models_dir(models_dir);
        const SnapshotDataset ref = load_dataset(reference_file);
        const ErrorReport report = evaluate_models(models, ref, repeats);
        save_error_report(out_file, report);
        Manifest manifest("eval", argc, argv);
        manifest.input(reference_file);
        manifest.output(out_file);
        manifest.write(out_file + ".manifest.json");
        for (const auto& m : report.models)
            std::cout << m.monitor << " " << m.quantity << ": E_A=" << format_double(m.e_abs_max)
                      << " E_R=" << format_double(m.e_rel_max) << " centers=" << m.centers << "\n";
        return 0;
    }

    if (pred->parsed()) {
        const InterpolantModel model = InterpolantModel::load(model_file);
        if (rs < 0.0 || rs > 1.0) throw ConfigError("--rs must lie in [0,1]");
        const Eigen::VectorXd v = model.evaluate(rs);
        const std::vector<double> curve(v.data(), v.data() + v.size());
        const double window_start =
            model.meta.count("window-start") ? parse_double(model.meta.at("window-start")) : 0.0;
        const int rate = model.meta.count("sample-rate") ? std::stoi(model.meta.at("sample-rate"))
                                                         : static_cast<int>(curve.size());
        const std::string unit = model.meta.count("unit") ? model.meta.at("unit") : "1";
        save_curve(out_file, curve, window_start, rate, unit,
                   "predicted monitor " + (model.meta.count("monitor") ? model.meta.at("monitor") : "?") +
                       " quantity " + (model.meta.count("quantity") ? model.meta.at("quantity") : "?") +
                       " rs " + format_double(rs));
        Manifest manifest("predict", argc, argv);
        manifest.input(model_file);
        manifest.output(out_file);
        manifest.write(out_file + ".manifest.json");
        std::cout << "wrote " << curve.size() << " samples to " << out_file << "\n";
        return 0;
    }

    if (est->parsed()) {
        const InterpolantModel model = InterpolantModel::load(model_file);
        Measurement meas;
        if (!measurement_file.empty()) {
            meas.values = load_curve(measurement_file);
            meas.true_degree = true_rs;
        } else if (!reference_file.empty()) {
            meas = synth_measurement(load_curve(reference_file), true_rs, sigma, seed);
        } else {
            throw ConfigError("estimate needs --measurement or --reference");
        }
        const EstimationResult result = estimate(meas.values, model, {}, with_scan);
        save_estimation_report(out_file, meas, result, model_file);
        Manifest manifest("estimate", argc, argv);
        manifest.input(model_file);
        if (!measurement_file.empty()) manifest.input(measurement_file);
        if (!reference_file.empty()) manifest.input(reference_file);
        manifest.output(out_file);
        manifest.write(out_file + ".manifest.json");
        std::cout << "estimated degree " << format_double(result.degree) << " (cost "
                  << format_double(result.cost_value) << ", " << result.iterations
                  << " iterations)\n";
        if (meas.true_degree >= 0)
            std::cout << "error vs true degree: "
                      << format_double(std::abs(result.degree - meas.true_degree)) << "\n";
        return 0;
    }

    if (bench->parsed()) {
        const InterpolantModel model = InterpolantModel::load(model_file);
        BenchResult b;
        if (!network_file.empty()) {
            const std::string cfg = resolve_config(network_file);
            const NetworkTopology net = load_network_file(cfg);
            WarmupCache cache(net, cache_dir);
            b = bench_model(model, inputs, repeats, &net, &cache);
        } else {
            b = bench_model(model, inputs, repeats);
        }
        std::ostringstream os;
        os << "# stenoflow-bench 1\n";
        os << "inputs " << b.inputs << "\n";
        os << "repeats " << b.repeats << "\n";
        os << "mean_pass_s " << format_double(b.mean_pass_s) << "\n";
        os << "std_pass_s " << format_double(b.std_pass_s) << "\n";
        os << "per_input_s " << format_double(b.per_input_s) << "\n";
        if (b.full_model_s > 0) {
            os << "full_model_s " << format_double(b.full_model_s) << "\n";
            os << "speedup " << format_double(b.speedup) << "\n";
        }
        write_text_file(out_file, os.str());
        Manifest manifest("bench", argc, argv);
        manifest.input(model_file);
        manifest.output(out_file);
        manifest.write(out_file + ".manifest.json");
        std::cout << os.str();
        return 0;
    }

    return 2;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const MissingArtifactError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
