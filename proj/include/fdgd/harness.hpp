#pragma once

#include "fdgd/certify.hpp"
#include "fdgd/controller.hpp"
#include "fdgd/cost.hpp"
#include "fdgd/network.hpp"
#include "fdgd/plant.hpp"
#include "fdgd/serialization.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fdgd {

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::size_t N = 15;
    std::string topology = "ring";  // ring | complete | edges
    std::vector<ControlGraph::Edge> edges;
    double spectral_scale = 0.2;
    std::array<double, 2> alpha_range{0.001, 0.1};
    double y_ref_value = 0.5;
    std::optional<std::size_t> p;  // defaults to N
    std::size_t steps = 20000;
    std::vector<double> etas{1e-5, 1e-6, 1e-7, 1e-8};
    std::string u0 = "zero";
    // "equilibrium": x0 = (I - A)^{-1} E q, the plant at rest under q with u = 0.
    // "zero": x0 = 0.
    std::string x0 = "equilibrium";
    std::size_t csv_stride = 10;
    // "trajectory": mean over the last 5% of the simulated steps.
    // "auto" or an integer K: affine closed-loop fast-forward (quadratic costs).
    std::string plateau_horizon = "auto";
    double theta = 0.5;
    std::optional<BoundMode> mode;
    bool plots = true;

    [[nodiscard]] std::size_t outputs() const { return p ? *p : N; }
    void validate() const;
};

[[nodiscard]] ExperimentConfig config_from_json(const io::json& j);
[[nodiscard]] io::json config_to_json(const ExperimentConfig& c);
[[nodiscard]] ExperimentConfig load_config(const std::string& path);

struct Benchmark {
    NetworkedPlant plant;
    ControlGraph graph;
    QuadraticTrackingCost cost;
    Vector q;
};

// Seeded benchmark: circulant A with normal first row scaled to
// ||A||_2 = spectral_scale, diagonal normal B and E, full normal C, D = 0,
// q ~ U(0, 1), alpha_i ~ U[alpha_range], y_ref = y_ref_value * 1.
[[nodiscard]] Benchmark generate_benchmark(const ExperimentConfig& config);

// Everything derived from a benchmark that the runs share read-only.
struct Problem {
    Benchmark bench;
    MixingMatrix W;
    Selector S;
    CostModel costs;
    SteadyStateMaps maps;
    ProjectedGradientContext ctx;
    OptimizerResult opt;
};

[[nodiscard]] Problem make_problem(Benchmark bench);

struct RunSummary {
    double eta = 0.0;
    std::size_t steps = 0;
    std::size_t steps_run = 0;
    bool diverged = false;
    std::size_t divergence_step = 0;
    bool above_eta_bar = false;
    bool envelope_applies = false;
    double initial_error = 0.0;
    double final_error = 0.0;
    double plateau = 0.0;
    std::string plateau_source;
    std::size_t plateau_horizon = 0;
    double trajectory_plateau = 0.0;
    double predicted_floor = 0.0;
    double eta_floor_bound = 0.0;
    double initial_output_gap = 0.0;   // max_j |y_j^0 - y_ref_j|
    double final_output_gap = 0.0;     // at the last simulated step
    double steady_output_offset = 0.0; // at the closed-loop fixed point
    CertificateMonitor::Counts violations;
    CertificateReport certificate;
    std::vector<StepRecord> records;
    std::vector<std::string> warnings;
};

struct RunOptions {
    std::size_t steps = 0;
    std::size_t record_stride = 10;
    std::string plateau_horizon = "auto";
    double stop_tolerance = 0.0;
    double theta = 0.5;
    std::optional<BoundMode> mode;
    std::string x0 = "equilibrium";
};

[[nodiscard]] Vector initial_state(const Problem& problem, const std::string& x0);

// Certify at eta, simulate from the chosen x0 and u0 = 0 with every monitor attached.
// Divergence is caught and reported in the summary.
[[nodiscard]] RunSummary run_single(const Problem& problem, double eta, const RunOptions& options);

struct SweepResult {
    ExperimentConfig config;
    std::shared_ptr<const Problem> problem;
    CertificateReport certificate;  // at eta_bar
    std::vector<RunSummary> runs;   // config.etas order
};

// One run per eta, concurrently.
[[nodiscard]] SweepResult run_sweep(const ExperimentConfig& config);

[[nodiscard]] io::json summary_to_json(const SweepResult& result);
[[nodiscard]] io::json run_to_json(const RunSummary& run);

// error.svg (log-scale e^k per eta), inputs.svg, outputs.svg (run nearest
// eta = 1e-6). Runs without records are skipped with a notice on `notices`.
std::vector<std::filesystem::path> emit_plots(const SweepResult& result, const std::filesystem::path& dir,
                                              std::vector<std::string>* notices = nullptr);

// trajectory_<i>.csv, certificate_<i>.json, summary.json, benchmark.json and
// the plots; returns the written paths.
std::vector<std::filesystem::path> write_artifacts(const SweepResult& result, const std::filesystem::path& dir);

[[nodiscard]] std::string trajectory_csv(const RunSummary& run, const Problem& problem);

}  // namespace fdgd
