#pragma once

#include <array>
#include <string>
#include <vector>

#include "stenoflow/simulation.hpp"
#include "stenoflow/vkoga.hpp"

namespace stenoflow {

/// Recorded curves of one monitor over the last heart beat: pressure in mmHg,
/// flow in cm^3/s, q samples each.
struct MonitorCurves {
    std::vector<double> pressure;
    std::vector<double> flow;
};

/// The healthy-state field at T1, computed once per network and reused for
/// every stenosis degree. Optionally persisted to disk, keyed by the
/// network/solver compatibility hash.
class WarmupCache {
public:
    explicit WarmupCache(const NetworkTopology& net, std::string cache_dir = "");
    /// Serialized simulation state at warmup_end (computed or loaded on first use).
    const std::string& state_bytes();
    uint64_t key() const { return key_; }

private:
    const NetworkTopology* net_;
    std::string cache_dir_;
    std::string bytes_;
    uint64_t key_;
};

/// Resumes from the cached warm-up state, activates the stenosis with `degree`,
/// integrates to T2 and returns the recorded window (q samples per monitor).
std::vector<MonitorCurves> run_full_model(const NetworkTopology& net, double degree,
                                          WarmupCache& cache);

/// N equally spaced stenosis degrees in [healthy, 1], both endpoints included.
std::vector<double> equispaced_degrees(int n, double healthy = 1e-6);

struct SnapshotDataset {
    std::vector<double> inputs; // sorted, pairwise distinct
    std::vector<std::string> monitor_labels;
    int q = 0;
    uint64_t network_hash = 0;
    SolverSettings solver;
    SnapshotProtocol protocol;
    /// outputs[monitor][quantity](input, sample); quantity 0 = pressure, 1 = flow
    std::vector<std::array<Eigen::MatrixXd, 2>> outputs;

    static constexpr const char* quantity_name(int k) { return k == 0 ? "pressure" : "flow"; }
    int monitor_index(const std::string& label) const;
};

/// Runs the snapshot protocol for every degree (concurrently for jobs > 1; the
/// assembly order is deterministic). Any failed run aborts with the failing R_s.
SnapshotDataset build_dataset(const NetworkTopology& net, const std::vector<double>& degrees,
                              WarmupCache& cache, int jobs = 1);

void save_dataset(const std::string& path, const SnapshotDataset& ds);
SnapshotDataset load_dataset(const std::string& path);

/// One CV-tuned sparse model per (monitor, quantity), in dataset order
/// (monitor-major, pressure before flow). Provenance lands in model.meta.
std::vector<InterpolantModel> train_all(const SnapshotDataset& ds, const CvSpec& spec,
                                        std::vector<CvResult>* details = nullptr);

struct ErrorReport {
    struct Row {
        double input;
        double e_abs; // ||f - fhat||_2
        double e_rel; // e_abs / ||f||_2
    };
    struct ModelReport {
        std::string monitor, quantity;
        int centers = 0;
        std::vector<Row> rows;
        double e_abs_max = 0; // E_A
        double e_rel_max = 0; // E_R
        double eval_mean_s = 0, eval_std_s = 0; // per full pass over the test inputs
    };
    std::vector<ModelReport> models;
    int repeats = 0;
};

/// Pointwise and aggregate errors of the models against a full-model reference
/// dataset, plus evaluation timing over `repeats` passes (one warm pass discarded).
ErrorReport evaluate_models(const std::vector<InterpolantModel>& models,
                            const SnapshotDataset& reference, int repeats = 100);

void save_error_report(const std::string& path, const ErrorReport& report);

/// (max - min) / mean of a curve. Errors on a zero-mean curve.
double pulsatility_index(const std::vector<double>& curve);

struct BenchResult {
    int inputs = 0, repeats = 0;
    double mean_pass_s = 0, std_pass_s = 0;
    double per_input_s = 0;
    double full_model_s = 0; // one full run, when a network is supplied
    double speedup = 0;
};

/// Times surrogate evaluation over an equispaced input grid; optionally times
/// one full-model run for the speedup figure.
BenchResult bench_model(const InterpolantModel& model, int inputs, int repeats,
                        const NetworkTopology* net = nullptr, WarmupCache* cache = nullptr);

/// Plot-ready curve file: time,value rows with unit header.
void save_curve(const std::string& path, const std::vector<double>& curve, double window_start,
                int sample_rate, const std::string& value_unit, const std::string& context);
std::vector<double> load_curve(const std::string& path);

} // namespace stenoflow
