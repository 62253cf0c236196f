// fdgd: certify, simulate, reproduce and check distributed feedback-optimization runs.
#include "fdgd/certify.hpp"
#include "fdgd/errors.hpp"
#include "fdgd/harness.hpp"
#include "fdgd/serialization.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitViolation = 4;

std::string default_out_dir() {
    if (const char* env = std::getenv("FDGD_OUTPUT_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return "fdgd_out";
}

fdgd::ExperimentConfig load(const std::string& path, const std::optional<std::uint64_t>& seed) {
    fdgd::ExperimentConfig cfg = fdgd::load_config(path);
    if (seed) {
        cfg.seed = *seed;
    }
    return cfg;
}

void print_row(const char* name, double value) { std::printf("  %-16s %.10g\n", name, value); }

void print_report(const fdgd::CertificateReport& r) {
    std::printf("stepsize certificate (N = %zu)\n", r.N);
    print_row("L_h", r.L_h);
    print_row("L_Phi", r.L_Phi);
    print_row("||Pi||", r.norm_Pi);
    print_row("lambda_1(P)", r.lambda1_P);
    print_row("lambda_n(Q)", r.lambdan_Q);
    print_row("||A^T P||", r.norm_ATP);
    print_row("lambda_N(W)", r.lambda_N);
    print_row("beta", r.beta);
    print_row("mu", r.mu);
    print_row("eta_1", r.eta_1);
    print_row("eta_2", r.eta_2);
    print_row("eta_3", r.eta_3);
    print_row("eta_bar", r.eta_bar);
    std::printf("error bound (mode %s, eta = %.10g)\n", fdgd::to_string(r.mode).c_str(), r.eta);
    print_row("sigma", r.sigma);
    print_row("nu_Phi", r.nu_Phi);
    print_row("nu", r.nu);
    print_row("c1", r.c1);
    print_row("c2", r.c2);
    print_row("c3", r.c3);
    print_row("c4", r.c4);
    print_row("delta", r.delta);
    print_row("error_floor", r.error_floor);
    print_row("eta_floor_bound", r.eta_floor_bound);
    print_row("consensus_bound", r.consensus_bound);
    for (const auto& n : r.notes) {
        std::printf("note: %s\n", n.c_str());
    }
}

int cmd_certify(const std::string& config, const std::optional<std::uint64_t>& seed, const std::optional<double>& eta,
                bool as_json) {
    const auto cfg = load(config, seed);
    const fdgd::Problem pb = fdgd::make_problem(fdgd::generate_benchmark(cfg));
    fdgd::CertifyOptions opts;
    opts.eta = eta;
    opts.theta = cfg.theta;
    opts.mode = cfg.mode;
    opts.x0 = fdgd::initial_state(pb, cfg.x0);
    const auto rep = fdgd::certify(pb.bench.plant, pb.maps, pb.W, pb.costs, opts);
    if (as_json) {
        std::cout << fdgd::io::report_to_json(rep).dump(2) << "\n";
    } else {
        print_report(rep);
    }
    return kExitOk;
}

int cmd_simulate(const std::string& config, const std::optional<std::uint64_t>& seed, const std::optional<double>& eta,
                 const std::optional<std::size_t>& steps, const std::string& out) {
    const auto cfg = load(config, seed);
    const fdgd::Problem pb = fdgd::make_problem(fdgd::generate_benchmark(cfg));
    const double eta_bar = fdgd::stepsize_bound(pb.bench.plant, pb.maps, pb.W, pb.costs).eta_bar;
    fdgd::RunOptions ropts;
    ropts.steps = steps ? *steps : cfg.steps;
    ropts.record_stride = cfg.csv_stride;
    ropts.plateau_horizon = cfg.plateau_horizon;
    ropts.theta = cfg.theta;
    ropts.mode = cfg.mode;
    ropts.x0 = cfg.x0;
    const fdgd::RunSummary run = fdgd::run_single(pb, eta ? *eta : eta_bar, ropts);

    std::filesystem::create_directories(out);
    const std::filesystem::path dir(out);
    fdgd::io::write_text_file((dir / "trajectory.csv").string(), fdgd::trajectory_csv(run, pb));
    fdgd::io::write_text_file((dir / "certificate.json").string(),
                              fdgd::io::report_to_json(run.certificate).dump(2) + "\n");
    fdgd::io::write_text_file((dir / "run.json").string(), fdgd::run_to_json(run).dump(2) + "\n");
    std::printf("eta = %.6g  steps = %zu  final error = %.6g  plateau (%s) = %.6g  violations = %zu\n", run.eta,
                run.steps_run, run.final_error, run.plateau_source.c_str(), run.plateau, run.violations.total());
    for (const auto& w : run.warnings) {
        std::fprintf(stderr, "warning: %s\n", w.c_str());
    }
    return run.diverged ? kExitDivergence : kExitOk;
}

int cmd_reproduce(const std::string& config, const std::optional<std::uint64_t>& seed, const std::string& out) {
    const auto cfg = load(config, seed);
    const fdgd::SweepResult res = fdgd::run_sweep(cfg);
    const auto written = fdgd::write_artifacts(res, out);
    std::printf("eta_bar = %.6g, beta = %.6g, sigma = %.6g\n", res.certificate.eta_bar, res.certificate.beta,
                res.certificate.sigma);
    std::printf("%-12s %-14s %-14s %-14s %s\n", "eta", "final_error", "plateau", "floor", "violations");
    bool diverged = false;
    for (const auto& r : res.runs) {
        std::printf("%-12.4g %-14.6g %-14.6g %-14.6g %zu%s\n", r.eta, r.final_error, r.plateau, r.predicted_floor,
                    r.violations.total(), r.diverged ? " (diverged)" : "");
        diverged = diverged || r.diverged;
    }
    std::printf("wrote %zu files to %s\n", written.size(), out.c_str());
    return diverged ? kExitDivergence : kExitOk;
}

int cmd_check(const std::string& csv_path, const std::string& cert_path) {
    std::ifstream in(csv_path);
    if (!in) {
        throw fdgd::ConfigurationError("cannot open " + csv_path);
    }
    const auto rows = fdgd::io::read_trajectory_csv(in);
    const auto rep = fdgd::io::report_from_json(fdgd::io::read_json_file(cert_path));
    if (rep.eta > rep.eta_bar) {
        std::printf("note: eta exceeds eta_bar; storage monotonicity is not certified\n");
    }
    fdgd::CertificateMonitor monitor(rep);
    for (const auto& r : rows) {
        monitor.observe(r.k, r.grad_norm, r.consensus_err, r.storage_U, r.err_to_opt);
    }
    const auto& c = monitor.counts();
    std::printf("rows checked: %zu\n", c.steps);
    std::printf("storage increases > 1e-12: %zu\n", c.storage);
    std::printf("gradient bound violations: %zu (max ratio %.6g)\n", c.gradient, c.max_gradient_ratio);
    std::printf("consensus bound violations: %zu (max ratio %.6g)\n", c.consensus, c.max_consensus_ratio);
    std::printf("envelope violations: %zu (max ratio %.6g)\n", c.envelope, c.max_envelope_ratio);
    return c.total() > 0 ? kExitViolation : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed feedback-optimization simulator and certificate checker"};
    app.require_subcommand(1);
    std::optional<std::uint64_t> seed;

    std::string config;
    std::optional<double> eta;
    bool as_json = false;
    auto* certify = app.add_subcommand("certify", "Print the stepsize and error-bound certificate");
    certify->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    certify->add_option("--seed", seed, "Override the config seed");
    certify->add_option("--eta", eta, "Evaluate the error constants at this stepsize (default eta_bar)");
    certify->add_flag("--json", as_json, "Emit JSON instead of the table");

    std::optional<std::size_t> steps;
    std::string out = default_out_dir();
    auto* simulate = app.add_subcommand("simulate", "Simulate one stepsize and write its artifacts");
    simulate->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    simulate->add_option("--seed", seed, "Override the config seed");
    simulate->add_option("--eta", eta, "Stepsize (default eta_bar)");
    simulate->add_option("--steps", steps, "Number of steps (default from the config)");
    simulate->add_option("--out", out, "Output directory (default $FDGD_OUTPUT_DIR or ./fdgd_out)");

    auto* reproduce = app.add_subcommand("reproduce", "Run the full stepsize sweep with plots");
    reproduce->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    reproduce->add_option("--seed", seed, "Override the config seed");
    reproduce->add_option("--out", out, "Output directory (default $FDGD_OUTPUT_DIR or ./fdgd_out)");

    std::string csv;
    std::string cert;
    auto* check = app.add_subcommand("check", "Re-verify a trajectory CSV against a certificate");
    check->add_option("trajectory", csv, "Trajectory CSV")->required()->check(CLI::ExistingFile);
    check->add_option("certificate", cert, "Certificate JSON")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*certify) {
            return cmd_certify(config, seed, eta, as_json);
        }
        if (*simulate) {
            return cmd_simulate(config, seed, eta, steps, out);
        }
        if (*reproduce) {
            return cmd_reproduce(config, seed, out);
        }
        if (*check) {
            return cmd_check(csv, cert);
        }
    } catch (const fdgd::DivergenceError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitDivergence;
    } catch (const fdgd::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const fdgd::io::json::exception& e) {
        std::fprintf(stderr, "error: malformed JSON: %s\n", e.what());
        return kExitValidation;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    }
    return kExitValidation;
}
