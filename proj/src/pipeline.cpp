#include "stenoflow/pipeline.hpp"
#include "stenoflow/errors.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace stenoflow {

namespace fs = std::filesystem;

WarmupCache::WarmupCache(const NetworkTopology& net, std::string cache_dir)
    : net_(&net), cache_dir_(std::move(cache_dir)) {
    const Simulation probe(net);
    key_ = fnv1a(format_double(net.protocol.warmup_end), probe.compatibility_hash());
}

const std::string& WarmupCache::state_bytes() {
    if (!bytes_.empty()) return bytes_;
    const std::string file = cache_dir_.empty()
                                 ? std::string()
                                 : (fs::path(cache_dir_) / ("warmup_" + hash_hex(key_) + ".state")).string();
    if (!file.empty() && fs::exists(file)) {
        bytes_ = read_text_file(file);
        return bytes_;
    }
    Simulation sim(*net_);
    if (net_->stenosis) sim.set_stenosis_degree(0.0); // healthy warm-up
    sim.advance_to(net_->protocol.warmup_end);
    bytes_ = sim.serialize_state();
    if (!file.empty()) {
        fs::create_directories(cache_dir_);
        write_text_file(file, bytes_);
    }
    return bytes_;
}

std::vector<MonitorCurves> run_full_model(const NetworkTopology& net, double degree,
                                          WarmupCache& cache) {
    if (!net.stenosis)
        throw ConfigError("run_full_model: network has no stenosis placement");
    if (net.monitors.empty())
        throw ConfigError("run_full_model: network defines no monitors");
    if (!(degree >= net.protocol.healthy_degree && degree <= 1.0))
        throw ConfigError("run_full_model: stenosis degree must lie in [" +
                          format_double(net.protocol.healthy_degree) + ", 1], got " +
                          format_double(degree));

    Simulation sim(net);
    sim.restore_state(cache.state_bytes());
    sim.set_stenosis_degree(degree);

    const auto& pr = net.protocol;
    const double dt = net.solver.dt;
    const long start_step = std::lround(pr.record_start / dt);
    const long final_step = std::lround(pr.final_time / dt);
    const long stride = std::lround(1.0 / (pr.sample_rate * dt));
    const int q = pr.q();

    std::vector<MonitorCurves> out(net.monitors.size());
    for (auto& mc : out) {
        mc.pressure.reserve(static_cast<std::size_t>(q));
        mc.flow.reserve(static_cast<std::size_t>(q));
    }

    while (sim.step_count() < final_step) {
        try {
            sim.step();
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " (R_s = " + format_double(degree) + ")");
        }
        const long n = sim.step_count();
        if (n > start_step && (n - start_step) % stride == 0) {
            for (std::size_t m = 0; m < net.monitors.size(); ++m) {
                out[m].pressure.push_back(sim.monitor_pressure_mmhg(static_cast<int>(m)));
                out[m].flow.push_back(sim.monitor_flow(static_cast<int>(m)));
            }
        }
    }
    for (const auto& mc : out)
        if (static_cast<int>(mc.pressure.size()) != q)
            throw NumericalError("recording produced " + std::to_string(mc.pressure.size()) +
                                 " samples, expected q = " + std::to_string(q));
    return out;
}

std::vector<double> equispaced_degrees(int n, double healthy) {
    if (n < 1) throw ConfigError("equispaced_degrees: need n >= 1");
    std::vector<double> out(static_cast<std::size_t>(n));
    if (n == 1) {
        out[0] = healthy;
        return out;
    }
    for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = healthy + (1.0 - healthy) * i / (n - 1);
    out.back() = 1.0;
    return out;
}

int SnapshotDataset::monitor_index(const std::string& label) const {
    for (std::size_t i = 0; i < monitor_labels.size(); ++i)
        if (monitor_labels[i] == label) return static_cast<int>(i);
    throw MissingArtifactError("dataset has no monitor labelled '" + label + "'");
}

SnapshotDataset build_dataset(const NetworkTopology& net, const std::vector<double>& degrees,
                              WarmupCache& cache, int jobs) {
    if (degrees.empty()) throw ConfigError("build_dataset: empty degree list");
    std::vector<double> sorted = degrees;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ConfigError("build_dataset: stenosis degrees must be pairwise distinct");

    cache.state_bytes(); // materialize before the workers share it

    SnapshotDataset ds;
    ds.inputs = sorted;
    for (const auto& m : net.monitors) ds.monitor_labels.push_back(m.label);
    ds.q = net.protocol.q();
    ds.network_hash = net.content_hash();
    ds.solver = net.solver;
    ds.protocol = net.protocol;
    const auto n_inputs = static_cast<Eigen::Index>(sorted.size());
    ds.outputs.assign(net.monitors.size(), {Eigen::MatrixXd(n_inputs, ds.q),
                                            Eigen::MatrixXd(n_inputs, ds.q)});

    std::vector<std::string> failures(sorted.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < sorted.size(); i = next++) {
            try {
                const auto curves = run_full_model(net, sorted[i], cache);
                for (std::size_t m = 0; m < curves.size(); ++m)
                    for (int s = 0; s < ds.q; ++s) {
                        ds.outputs[m][0](static_cast<Eigen::Index>(i), s) = curves[m].pressure[static_cast<std::size_t>(s)];
                        ds.outputs[m][1](static_cast<Eigen::Index>(i), s) = curves[m].flow[static_cast<std::size_t>(s)];
                    }
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::string failed;
    for (std::size_t i = 0; i < failures.size(); ++i)
        if (!failures[i].empty())
            failed += "  R_s = " + format_double(sorted[i]) + ": " + failures[i] + "\n";
    if (!failed.empty())
        throw NumericalError("build_dataset: snapshot runs failed:\n" + failed);

    for (const auto& per_monitor : ds.outputs)
        for (const auto& mat : per_monitor)
            if (!mat.allFinite())
                throw NumericalError("build_dataset: non-finite snapshot values");
    return ds;
}

// --- dataset file ---

void save_dataset(const std::string& path, const SnapshotDataset& ds) {
    std::ostringstream os;
    os << "# stenoflow-dataset 1\n";
    os << "# network-hash " << hash_hex(ds.network_hash) << "\n";
    os << "# solver dt=" << format_double(ds.solver.dt)
       << " target_dz=" << format_double(ds.solver.target_dz) << "\n";
    os << "# protocol warmup_end=" << format_double(ds.protocol.warmup_end)
       << " final_time=" << format_double(ds.protocol.final_time)
       << " record_start=" << format_double(ds.protocol.record_start)
       << " sample_rate=" << ds.protocol.sample_rate
       << " healthy_degree=" << format_double(ds.protocol.healthy_degree) << "\n";
    os << "# units pressure=mmHg flow=cm^3/s\n";
    os << "# monitors";
    for (const auto& l : ds.monitor_labels) os << " " << l;
    os << "\n# inputs " << ds.inputs.size() << "\n";
    os << "# q " << ds.q << "\n";
    os << "# columns input,monitor,quantity,values\n";
    for (std::size_t i = 0; i < ds.inputs.size(); ++i)
        for (std::size_t m = 0; m < ds.monitor_labels.size(); ++m)
            for (int k = 0; k < 2; ++k) {
                os << format_double(ds.inputs[i]) << "," << ds.monitor_labels[m] << ","
                   << SnapshotDataset::quantity_name(k);
                for (int s = 0; s < ds.q; ++s)
                    os << "," << format_double(ds.outputs[m][static_cast<std::size_t>(k)](
                                  static_cast<Eigen::Index>(i), s));
                os << "\n";
            }
    write_text_file(path, os.str());
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto p = s.find(sep, start);
        if (p == std::string::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, p - start));
        start = p + 1;
    }
}

std::string header_field(const std::string& line, const std::string& key) {
    const auto p = line.find(key + "=");
    if (p == std::string::npos)
        throw MissingArtifactError("dataset header missing field '" + key + "'");
    const auto start = p + key.size() + 1;
    const auto end = line.find(' ', start);
    return line.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

} // namespace

SnapshotDataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("cannot open dataset file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "# stenoflow-dataset 1")
        throw MissingArtifactError("dataset file " + path + " has unsupported version header");

    SnapshotDataset ds;
    std::size_t n_inputs = 0;
    while (std::getline(in, line) && !line.empty() && line[0] == '#') {
        if (line.rfind("# network-hash ", 0) == 0) {
            ds.network_hash = std::stoull(line.substr(15), nullptr, 16);
        } else if (line.rfind("# solver ", 0) == 0) {
            ds.solver.dt = parse_double(header_field(line, "dt"));
            ds.solver.target_dz = parse_double(header_field(line, "target_dz"));
        } else if (line.rfind("# protocol ", 0) == 0) {
            ds.protocol.warmup_end = parse_double(header_field(line, "warmup_end"));
            ds.protocol.final_time = parse_double(header_field(line, "final_time"));
            ds.protocol.record_start = parse_double(header_field(line, "record_start"));
            ds.protocol.sample_rate = static_cast<int>(parse_double(header_field(line, "sample_rate")));
            ds.protocol.healthy_degree = parse_double(header_field(line, "healthy_degree"));
        } else if (line.rfind("# monitors", 0) == 0) {
            std::istringstream ls(line.substr(10));
            std::string tok;
            while (ls >> tok) ds.monitor_labels.push_back(tok);
        } else if (line.rfind("# inputs ", 0) == 0) {
            n_inputs = static_cast<std::size_t>(std::stoul(line.substr(9)));
        } else if (line.rfind("# q ", 0) == 0) {
            ds.q = std::stoi(line.substr(4));
        }
        if (in.peek() != '#') break;
    }
    if (n_inputs == 0 || ds.q == 0 || ds.monitor_labels.empty())
        throw MissingArtifactError("dataset file " + path + " has an incomplete header");

    ds.inputs.assign(n_inputs, 0.0);
    ds.outputs.assign(ds.monitor_labels.size(),
                      {Eigen::MatrixXd(static_cast<Eigen::Index>(n_inputs), ds.q),
                       Eigen::MatrixXd(static_cast<Eigen::Index>(n_inputs), ds.q)});

    std::size_t row = 0;
    const std::size_t rows_expected = n_inputs * ds.monitor_labels.size() * 2;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split(line, ',');
        if (cells.size() != 3 + static_cast<std::size_t>(ds.q))
            throw MissingArtifactError("dataset row has wrong column count in " + path);
        const double input = parse_double(cells[0]);
        const int m = ds.monitor_index(cells[1]);
        const int k = cells[2] == "pressure" ? 0 : cells[2] == "flow" ? 1 : -1;
        if (k < 0) throw MissingArtifactError("dataset row has unknown quantity '" + cells[2] + "'");
        const auto i = static_cast<Eigen::Index>(row / (ds.monitor_labels.size() * 2));
        ds.inputs[static_cast<std::size_t>(i)] = input;
        for (int s = 0; s < ds.q; ++s)
            ds.outputs[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)](i, s) =
                parse_double(cells[static_cast<std::size_t>(3 + s)]);
        ++row;
    }
    if (row != rows_expected)
        throw MissingArtifactError("dataset file " + path + " truncated: " + std::to_string(row) +
                                   " rows, expected " + std::to_string(rows_expected));
    return ds;
}

// --- training ---

std::vector<InterpolantModel> train_all(const SnapshotDataset& ds, const CvSpec& spec,
                                        std::vector<CvResult>* details) {
    std::vector<InterpolantModel> models;
    for (std::size_t m = 0; m < ds.monitor_labels.size(); ++m)
        for (int k = 0; k < 2; ++k) {
            CvResult res = cross_validate(ds.inputs, ds.outputs[m][static_cast<std::size_t>(k)], spec);
            InterpolantModel model = std::move(res.model);
            model.meta["monitor"] = ds.monitor_labels[m];
            model.meta["quantity"] = SnapshotDataset::quantity_name(k);
            model.meta["dataset-size"] = std::to_string(ds.inputs.size());
            model.meta["network-hash"] = hash_hex(ds.network_hash);
            model.meta["seed"] = std::to_string(spec.seed);
            model.meta["window-start"] = format_double(ds.protocol.record_start);
            model.meta["sample-rate"] = std::to_string(ds.protocol.sample_rate);
            model.meta["unit"] = k == 0 ? "mmHg" : "cm^3/s";
            if (details) {
                res.model = model;
                details->push_back(std::move(res));
            }
            models.push_back(std::move(model));
        }
    return models;
}

// --- evaluation ---

ErrorReport evaluate_models(const std::vector<InterpolantModel>& models,
                            const SnapshotDataset& reference, int repeats) {
    ErrorReport report;
    report.repeats = repeats;
    for (const auto& model : models) {
        const auto mit = model.meta.find("monitor");
        const auto qit = model.meta.find("quantity");
        if (mit == model.meta.end() || qit == model.meta.end())
            throw MissingArtifactError("model lacks monitor/quantity provenance");
        const int m = reference.monitor_index(mit->second);
        const int k = qit->second == "pressure" ? 0 : 1;
        const Eigen::MatrixXd& ref = reference.outputs[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)];
        if (model.output_dim != reference.q)
            throw MissingArtifactError("model q does not match the reference dataset");

        ErrorReport::ModelReport mr;
        mr.monitor = mit->second;
        mr.quantity = qit->second;
        mr.centers = static_cast<int>(model.centers.size());
        for (std::size_t i = 0; i < reference.inputs.size(); ++i) {
            const Eigen::VectorXd pred = model.evaluate(reference.inputs[i]);
            const Eigen::VectorXd truth = ref.row(static_cast<Eigen::Index>(i)).transpose();
            ErrorReport::Row row;
            row.input = reference.inputs[i];
            row.e_abs = (truth - pred).norm();
            row.e_rel = row.e_abs / truth.norm();
            mr.e_abs_max = std::max(mr.e_abs_max, row.e_abs);
            mr.e_rel_max = std::max(mr.e_rel_max, row.e_rel);
            mr.rows.push_back(row);
        }

        // evaluation timing: one warm pass discarded, then `repeats` timed passes
        double sink = 0;
        for (const double x : reference.inputs) sink += model.evaluate(x).sum();
        std::vector<double> pass_times;
        pass_times.reserve(static_cast<std::size_t>(repeats));
        for (int r = 0; r < repeats; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            for (const double x : reference.inputs) sink += model.evaluate(x).sum();
            const auto t1 = std::chrono::steady_clock::now();
            pass_times.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
        volatile double guard = sink;
        (void)guard;
        mr.eval_mean_s = mean(pass_times);
        mr.eval_std_s = stddev(pass_times);
        report.models.push_back(std::move(mr));
    }
    return report;
}

void save_error_report(const std::string& path, const ErrorReport& report) {
    std::ostringstream os;
    os << "# stenoflow-error-report 1\n";
    os << "# repeats " << report.repeats << "\n";
    os << "# aggregates monitor,quantity,centers,E_A,E_R,eval_mean_s,eval_std_s\n";
    for (const auto& m : report.models)
        os << "aggregate," << m.monitor << "," << m.quantity << "," << m.centers << ","
           << format_double(m.e_abs_max) << "," << format_double(m.e_rel_max) << ","
           << format_double(m.eval_mean_s) << "," << format_double(m.eval_std_s) << "\n";
    os << "# rows input,monitor,quantity,e_abs,e_rel\n";
    for (const auto& m : report.models)
        for (const auto& r : m.rows)
            os << format_double(r.input) << "," << m.monitor << "," << m.quantity << ","
               << format_double(r.e_abs) << "," << format_double(r.e_rel) << "\n";
    write_text_file(path, os.str());
}

double pulsatility_index(const std::vector<double>& curve) {
    if (curve.empty()) throw ConfigError("pulsatility_index: empty curve");
    const auto [lo, hi] = std::minmax_element(curve.begin(), curve.end());
    const double m = mean(curve);
    const double scale = std::max(std::abs(*lo), std::abs(*hi));
    if (m == 0.0 || std::abs(m) < 1e-14 * scale)
        throw NumericalError("pulsatility_index: curve mean is zero");
    return (*hi - *lo) / m;
}

BenchResult bench_model(const InterpolantModel& model, int inputs, int repeats,
                        const NetworkTopology* net, WarmupCache* cache) {
    if (inputs < 1 || repeats < 1) throw ConfigError("bench_model: inputs and repeats must be >= 1");
    BenchResult res;
    res.inputs = inputs;
    res.repeats = repeats;
    const std::vector<double> grid = equispaced_degrees(inputs);

    double sink = 0;
    for (const double x : grid) sink += model.evaluate(x).sum(); // warm pass
    std::vector<double> pass_times;
    pass_times.reserve(static_cast<std::size_t>(repeats));
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        for (const double x : grid) sink += model.evaluate(x).sum();
        const auto t1 = std::chrono::steady_clock::now();
        pass_times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    volatile double guard = sink;
    (void)guard;
    res.mean_pass_s = mean(pass_times);
    res.std_pass_s = stddev(pass_times);
    res.per_input_s = res.mean_pass_s / inputs;

    if (net && cache) {
        cache->state_bytes();
        const auto t0 = std::chrono::steady_clock::now();
        run_full_model(*net, 0.5, *cache);
        const auto t1 = std::chrono::steady_clock::now();
        res.full_model_s = std::chrono::duration<double>(t1 - t0).count();
        res.speedup = res.full_model_s / res.per_input_s;
    }
    return res;
}

void save_curve(const std::string& path, const std::vector<double>& curve, double window_start,
                int sample_rate, const std::string& value_unit, const std::string& context) {
    std::ostringstream os;
    os << "# stenoflow-curve 1\n";
    os << "# units time=s value=" << value_unit << "\n";
    os << "# " << context << "\n";
    os << "time,value\n";
    for (std::size_t j = 0; j < curve.size(); ++j) {
        const double t = window_start + static_cast<double>(j + 1) / sample_rate;
        os << format_double(t) << "," << format_double(curve[j]) << "\n";
    }
    write_text_file(path, os.str());
}

std::vector<double> load_curve(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("cannot open curve file: " + path);
    std::string line;
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("time,", 0) == 0) continue;
        const auto cells = split(line, ',');
        if (cells.size() != 2) throw MissingArtifactError("curve row has wrong column count in " + path);
        values.push_back(parse_double(cells[1]));
    }
    if (values.empty()) throw MissingArtifactError("curve file " + path + " has no samples");
    return values;
}

} // namespace stenoflow
