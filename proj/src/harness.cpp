#include "fdgd/harness.hpp"

#include "fdgd/closed_loop_operator.hpp"
#include "fdgd/errors.hpp"
#include "fdgd/rng.hpp"
#include "fdgd/svg.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>

namespace fdgd {

namespace {

std::size_t parse_horizon(const std::string& text) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(text, &pos);
    } catch (const std::exception&) {
        throw ConfigurationError("plateau_horizon must be \"auto\", \"trajectory\" or a positive integer");
    }
    if (pos != text.size() || v == 0) {
        throw ConfigurationError("plateau_horizon must be \"auto\", \"trajectory\" or a positive integer");
    }
    return static_cast<std::size_t>(v);
}

double max_abs_gap(const Vector& y, const Vector& ref) { return (y - ref).cwiseAbs().maxCoeff(); }

}  // namespace

void ExperimentConfig::validate() const {
    if (N == 0) {
        throw ConfigurationError("N must be at least 1");
    }
    if (topology != "ring" && topology != "complete" && topology != "edges") {
        throw ConfigurationError("topology must be ring, complete or edges");
    }
    if (!(spectral_scale > 0.0 && spectral_scale < 1.0)) {
        throw ConfigurationError("spectral_scale must lie in (0, 1)");
    }
    if (!(alpha_range[0] > 0.0) || !(alpha_range[1] >= alpha_range[0])) {
        throw ConfigurationError("alpha_range needs 0 < low <= high");
    }
    if (outputs() == 0) {
        throw ConfigurationError("p must be at least 1");
    }
    if (etas.empty()) {
        throw ConfigurationError("etas must be nonempty");
    }
    for (double e : etas) {
        if (!(e > 0.0) || !std::isfinite(e)) {
            throw ConfigurationError("every eta must be positive");
        }
    }
    if (u0 != "zero") {
        throw UnsupportedError("only u0 = \"zero\" is supported by the sweep");
    }
    if (x0 != "equilibrium" && x0 != "zero") {
        throw ConfigurationError("x0 must be \"equilibrium\" or \"zero\"");
    }
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw ConfigurationError("theta must lie in [0, 1]");
    }
    if (plateau_horizon != "auto" && plateau_horizon != "trajectory") {
        (void)parse_horizon(plateau_horizon);
    }
}

ExperimentConfig config_from_json(const io::json& j) {
    ExperimentConfig c;
    c.seed = j.value("seed", c.seed);
    c.N = j.value("N", c.N);
    c.topology = j.value("topology", c.topology);
    if (j.contains("edges")) {
        for (const auto& e : j.at("edges")) {
            c.edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
        }
        if (!j.contains("topology")) {
            c.topology = "edges";
        }
    }
    c.spectral_scale = j.value("spectral_scale", c.spectral_scale);
    if (j.contains("alpha_range")) {
        const auto& a = j.at("alpha_range");
        if (!a.is_array() || a.size() != 2) {
            throw ConfigurationError("alpha_range must be [low, high]");
        }
        c.alpha_range = {a.at(0).get<double>(), a.at(1).get<double>()};
    }
    c.y_ref_value = j.value("y_ref_value", c.y_ref_value);
    if (j.contains("p") && !j.at("p").is_null()) {
        c.p = j.at("p").get<std::size_t>();
    }
    c.steps = j.value("steps", c.steps);
    if (j.contains("etas")) {
        c.etas = j.at("etas").get<std::vector<double>>();
    }
    c.u0 = j.value("u0", c.u0);
    c.x0 = j.value("x0", c.x0);
    c.csv_stride = j.value("csv_stride", c.csv_stride);
    if (j.contains("plateau_horizon")) {
        const auto& h = j.at("plateau_horizon");
        c.plateau_horizon = h.is_string() ? h.get<std::string>() : std::to_string(h.get<std::size_t>());
    }
    c.theta = j.value("theta", c.theta);
    if (j.contains("mode") && !j.at("mode").is_null()) {
        c.mode = parse_bound_mode(j.at("mode").get<std::string>());
    }
    c.plots = j.value("plots", c.plots);
    c.validate();
    return c;
}

io::json config_to_json(const ExperimentConfig& c) {
    io::json j;
    j["seed"] = c.seed;
    j["N"] = c.N;
    j["topology"] = c.topology;
    if (c.topology == "edges") {
        io::json edges = io::json::array();
        for (const auto& [a, b] : c.edges) {
            edges.push_back(io::json::array({a, b}));
        }
        j["edges"] = edges;
    }
    j["spectral_scale"] = c.spectral_scale;
    j["alpha_range"] = {c.alpha_range[0], c.alpha_range[1]};
    j["y_ref_value"] = c.y_ref_value;
    j["p"] = c.outputs();
    j["steps"] = c.steps;
    j["etas"] = c.etas;
    j["u0"] = c.u0;
    j["x0"] = c.x0;
    j["csv_stride"] = c.csv_stride;
    j["plateau_horizon"] = c.plateau_horizon;
    j["theta"] = c.theta;
    j["mode"] = c.mode ? io::json(to_string(*c.mode)) : io::json(nullptr);
    j["plots"] = c.plots;
    return j;
}

ExperimentConfig load_config(const std::string& path) { return config_from_json(io::read_json_file(path)); }

Benchmark generate_benchmark(const ExperimentConfig& config) {
    config.validate();
    const auto n = static_cast<Eigen::Index>(config.N);
    const auto p = static_cast<Eigen::Index>(config.outputs());

    rng::Stream row_rng(config.seed, rng::StreamId::circulant_row);
    Vector row(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        row(j) = row_rng.normal();
    }
    Matrix a(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            a(i, j) = row((j - i + n) % n);
        }
    }
    const double norm = numerics::spectral_norm(a);
    if (!(norm > 0.0)) {
        throw ConfigurationError("circulant row drew all zeros");
    }
    a *= config.spectral_scale / norm;

    rng::Stream b_rng(config.seed, rng::StreamId::input_matrix);
    rng::Stream c_rng(config.seed, rng::StreamId::output_matrix);
    rng::Stream e_rng(config.seed, rng::StreamId::disturbance_matrix);
    Matrix b = Matrix::Zero(n, n);
    Matrix e = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        b(i, i) = b_rng.normal();
        e(i, i) = e_rng.normal();
    }
    Matrix c(p, n);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            c(i, j) = c_rng.normal();
        }
    }

    rng::Stream q_rng(config.seed, rng::StreamId::disturbance);
    Vector q(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        q(i) = q_rng.uniform();
    }
    rng::Stream alpha_rng(config.seed, rng::StreamId::alpha);
    QuadraticTrackingCost cost;
    cost.alpha.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        cost.alpha(i) = alpha_rng.uniform(config.alpha_range[0], config.alpha_range[1]);
    }
    cost.y_ref = Vector::Constant(p, config.y_ref_value);
    cost.input_dim = n;

    const Partition unit = Partition::uniform(config.N, 1);
    NetworkedPlant plant(PlantMatrices{a, b, c, Matrix::Zero(p, n), e}, unit, unit, unit);
    ControlGraph graph = config.topology == "ring"       ? ControlGraph::ring(config.N)
                         : config.topology == "complete" ? ControlGraph::complete(config.N)
                                                         : ControlGraph(config.N, config.edges);
    return Benchmark{std::move(plant), std::move(graph), std::move(cost), std::move(q)};
}

Problem make_problem(Benchmark bench) {
    (void)validate(bench.plant);
    MixingMatrix w = metropolis_weights(bench.graph);
    Selector s(bench.plant.input_dims());
    CostModel costs(bench.cost);
    SteadyStateMaps maps = steady_state_maps(bench.plant);
    ProjectedGradientContext ctx = make_gradient_context(maps.G, costs);
    OptimizerResult opt = optimizer(maps, costs, bench.q);
    return Problem{std::move(bench), std::move(w), std::move(s), std::move(costs),
                   std::move(maps),  std::move(ctx), std::move(opt)};
}

Vector initial_state(const Problem& pb, const std::string& x0) {
    if (x0 == "zero") {
        return Vector::Zero(pb.bench.plant.n());
    }
    if (x0 == "equilibrium") {
        return pb.maps.state_disturbance_gain * pb.bench.q;
    }
    throw ConfigurationError("x0 must be \"equilibrium\" or \"zero\"");
}

RunSummary run_single(const Problem& pb, double eta, const RunOptions& options) {
    const NetworkedPlant& plant = pb.bench.plant;
    RunSummary sum;
    sum.eta = eta;
    sum.steps = options.steps;

    const Vector x0 = initial_state(pb, options.x0);
    CertifyOptions copts;
    copts.eta = eta;
    copts.theta = options.theta;
    copts.mode = options.mode;
    copts.x0 = x0;
    sum.certificate = certify(plant, pb.maps, pb.W, pb.costs, copts);
    const CertificateReport& cert = sum.certificate;
    sum.above_eta_bar = eta > cert.eta_bar;
    sum.envelope_applies = !sum.above_eta_bar && cert.has_error_bound();
    sum.predicted_floor = cert.error_floor;
    sum.eta_floor_bound = cert.eta_floor_bound;
    if (sum.above_eta_bar) {
        sum.warnings.emplace_back("eta exceeds the certified eta_bar");
    }

    const Vector u0 = Vector::Zero(plant.m() * static_cast<Eigen::Index>(pb.costs.agents()));
    const StorageEvaluator storage(plant, pb.maps, pb.W, pb.costs, cert.P, eta, pb.bench.q);
    CertificateMonitor monitor(cert);

    const std::size_t window = std::max<std::size_t>(1, options.steps / 20);
    const std::size_t window_begin = options.steps >= window ? options.steps - window : 0;
    double window_sum = 0.0;
    std::size_t window_count = 0;
    double last_error = 0.0;
    Vector last_y;
    bool have_first = false;

    SimulationOptions sopts;
    sopts.record_stride = 0;
    sopts.stop_tolerance = options.stop_tolerance;
    sopts.storage = [&storage](const Vector& x, const Vector& u) { return storage(x, u); };
    sopts.u_star = pb.opt.u_star;
    sopts.observers.emplace_back([&](const StepView& v) {
        monitor.observe(v);
        if (!have_first) {
            sum.initial_error = v.err_to_opt;
            sum.initial_output_gap = max_abs_gap(v.y, pb.bench.cost.y_ref);
            have_first = true;
        }
        if (options.record_stride > 0 && v.k % options.record_stride == 0) {
            sum.records.push_back(make_record(v));
        }
        if (v.k >= window_begin) {
            window_sum += v.err_to_opt;
            ++window_count;
        }
        last_error = v.err_to_opt;
        last_y = v.y;
    });

    try {
        const ClosedLoopTrajectory traj =
            simulate(plant, pb.W, pb.S, pb.costs, pb.ctx, eta, pb.bench.q, x0, u0, options.steps, sopts);
        sum.steps_run = traj.steps_run;
        for (const auto& w : traj.warnings) {
            sum.warnings.push_back(w);
        }
    } catch (const DivergenceError& e) {
        sum.diverged = true;
        sum.divergence_step = e.step();
        sum.steps_run = e.step();
        sum.warnings.emplace_back(e.what());
    }
    sum.violations = monitor.counts();
    sum.final_error = last_error;
    sum.trajectory_plateau = window_count > 0 ? window_sum / static_cast<double>(window_count) : 0.0;
    if (last_y.size() > 0) {
        sum.final_output_gap = max_abs_gap(last_y, pb.bench.cost.y_ref);
    }

    const bool affine = options.plateau_horizon != "trajectory" && pb.costs.quadratic().has_value() && !sum.diverged;
    if (affine) {
        const AffineClosedLoop loop(plant, pb.W, pb.costs, eta, pb.bench.q, pb.opt.u_star, pb.opt.x_star);
        std::optional<std::size_t> horizon;
        if (options.plateau_horizon != "auto") {
            horizon = parse_horizon(options.plateau_horizon);
        }
        const PlateauEstimate est = affine_plateau(loop, loop.stack(x0, u0), horizon);
        sum.plateau = est.plateau;
        sum.plateau_horizon = est.horizon;
        sum.plateau_source = "affine";
        const Vector z_eq = loop.fixed_point();
        const Vector y_eq = plant.C() * z_eq.head(plant.n()) +
                            plant.D() * pb.S.apply(z_eq.tail(z_eq.size() - plant.n()));
        sum.steady_output_offset = max_abs_gap(y_eq, pb.bench.cost.y_ref);
    } else {
        sum.plateau = sum.trajectory_plateau;
        sum.plateau_horizon = options.steps;
        sum.plateau_source = "trajectory";
        sum.steady_output_offset = max_abs_gap(pb.opt.y_star, pb.bench.cost.y_ref);
    }
    return sum;
}

SweepResult run_sweep(const ExperimentConfig& config) {
    config.validate();
    SweepResult res;
    res.config = config;
    res.problem = std::make_shared<const Problem>(make_problem(generate_benchmark(config)));
    const Problem& pb = *res.problem;

    CertifyOptions copts;
    copts.theta = config.theta;
    copts.mode = config.mode;
    copts.x0 = initial_state(pb, config.x0);
    res.certificate = certify(pb.bench.plant, pb.maps, pb.W, pb.costs, copts);

    RunOptions ropts;
    ropts.steps = config.steps;
    ropts.record_stride = config.csv_stride;
    ropts.plateau_horizon = config.plateau_horizon;
    ropts.theta = config.theta;
    ropts.mode = config.mode;
    ropts.x0 = config.x0;

    std::vector<std::future<RunSummary>> futures;
    futures.reserve(config.etas.size());
    for (double eta : config.etas) {
        futures.push_back(std::async(std::launch::async, [&pb, eta, ropts] { return run_single(pb, eta, ropts); }));
    }
    for (auto& f : futures) {
        res.runs.push_back(f.get());
    }
    return res;
}

io::json run_to_json(const RunSummary& r) {
    using io::json;
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    json j;
    j["eta"] = r.eta;
    j["steps"] = r.steps;
    j["steps_run"] = r.steps_run;
    j["diverged"] = r.diverged;
    j["divergence_step"] = r.diverged ? json(r.divergence_step) : json(nullptr);
    j["above_eta_bar"] = r.above_eta_bar;
    j["envelope_applies"] = r.envelope_applies;
    j["initial_error"] = num(r.initial_error);
    j["final_error"] = num(r.final_error);
    j["plateau"] = num(r.plateau);
    j["plateau_source"] = r.plateau_source;
    j["plateau_horizon"] = r.plateau_horizon;
    j["trajectory_plateau"] = num(r.trajectory_plateau);
    j["predicted_floor"] = num(r.predicted_floor);
    j["eta_floor_bound"] = num(r.eta_floor_bound);
    j["initial_output_gap"] = num(r.initial_output_gap);
    j["final_output_gap"] = num(r.final_output_gap);
    j["steady_output_offset"] = num(r.steady_output_offset);
    j["violations"] = {{"storage", r.violations.storage},
                       {"gradient", r.violations.gradient},
                       {"consensus", r.violations.consensus},
                       {"envelope", r.violations.envelope},
                       {"steps_checked", r.violations.steps}};
    j["max_gradient_ratio"] = num(r.violations.max_gradient_ratio);
    j["max_consensus_ratio"] = num(r.violations.max_consensus_ratio);
    j["max_envelope_ratio"] = num(r.violations.max_envelope_ratio);
    j["warnings"] = r.warnings;
    return j;
}

io::json summary_to_json(const SweepResult& result) {
    io::json j;
    j["config"] = config_to_json(result.config);
    j["eta_bar"] = result.certificate.eta_bar;
    j["beta"] = result.certificate.beta;
    j["sigma"] = result.certificate.sigma;
    j["L_Phi"] = result.certificate.L_Phi;
    j["mode"] = to_string(result.certificate.mode);
    j["u_star"] = io::to_json(result.problem->opt.u_star);
    io::json runs = io::json::array();
    for (const auto& r : result.runs) {
        runs.push_back(run_to_json(r));
    }
    j["runs"] = runs;
    return j;
}

std::string trajectory_csv(const RunSummary& run, const Problem& problem) {
    std::ostringstream os;
    io::write_trajectory_csv(os, run.records, problem.bench.plant.p(), problem.bench.plant.m());
    return os.str();
}

std::vector<std::filesystem::path> emit_plots(const SweepResult& result, const std::filesystem::path& dir,
                                              std::vector<std::string>* notices) {
    std::vector<std::filesystem::path> written;
    std::vector<svg::Series> errors;
    const RunSummary* featured = nullptr;
    for (const auto& r : result.runs) {
        if (r.records.empty()) {
            if (notices) {
                notices->push_back("run with eta = " + io::format_double(r.eta) + " has no records; skipped in plots");
            }
            continue;
        }
        svg::Series s;
        char label[64];
        std::snprintf(label, sizeof label, "eta = %.3g", r.eta);
        s.label = label;
        for (const auto& rec : r.records) {
            s.x.push_back(static_cast<double>(rec.k));
            s.y.push_back(rec.err_to_opt);
        }
        errors.push_back(std::move(s));
        if (!featured || std::abs(std::log(r.eta / 1e-6)) < std::abs(std::log(featured->eta / 1e-6))) {
            featured = &r;
        }
    }
    if (!featured) {
        return written;
    }
    std::filesystem::create_directories(dir);
    svg::PlotSpec es{"Mean distance to the optimizer", "k", "e^k", true, std::nullopt, ""};
    written.push_back(dir / "error.svg");
    io::write_text_file(written.back().string(), svg::line_plot(es, errors));

    const Eigen::Index m = result.problem->bench.plant.m();
    const Eigen::Index p = result.problem->bench.plant.p();
    std::vector<svg::Series> inputs(static_cast<std::size_t>(m));
    std::vector<svg::Series> outputs(static_cast<std::size_t>(p));
    for (Eigen::Index i = 0; i < m; ++i) {
        inputs[static_cast<std::size_t>(i)].label = "u_" + std::to_string(i + 1);
    }
    for (Eigen::Index i = 0; i < p; ++i) {
        outputs[static_cast<std::size_t>(i)].label = "y_" + std::to_string(i + 1);
    }
    for (const auto& rec : featured->records) {
        for (Eigen::Index i = 0; i < m; ++i) {
            inputs[static_cast<std::size_t>(i)].x.push_back(static_cast<double>(rec.k));
            inputs[static_cast<std::size_t>(i)].y.push_back(rec.applied(i));
        }
        for (Eigen::Index i = 0; i < p; ++i) {
            outputs[static_cast<std::size_t>(i)].x.push_back(static_cast<double>(rec.k));
            outputs[static_cast<std::size_t>(i)].y.push_back(rec.y(i));
        }
    }
    char title[96];
    std::snprintf(title, sizeof title, "Inputs, eta = %.3g", featured->eta);
    svg::PlotSpec is{title, "k", "S u^k", false, std::nullopt, ""};
    written.push_back(dir / "inputs.svg");
    io::write_text_file(written.back().string(), svg::line_plot(is, inputs));

    std::snprintf(title, sizeof title, "Outputs, eta = %.3g", featured->eta);
    const double ref = result.problem->bench.cost.y_ref(0);
    svg::PlotSpec os{title, "k", "y^k", false, ref, "y_ref"};
    written.push_back(dir / "outputs.svg");
    io::write_text_file(written.back().string(), svg::line_plot(os, outputs));
    return written;
}

std::vector<std::filesystem::path> write_artifacts(const SweepResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
        const auto csv = dir / ("trajectory_" + std::to_string(i) + ".csv");
        io::write_text_file(csv.string(), trajectory_csv(result.runs[i], *result.problem));
        written.push_back(csv);
        const auto cert = dir / ("certificate_" + std::to_string(i) + ".json");
        io::write_text_file(cert.string(), io::report_to_json(result.runs[i].certificate).dump(2) + "\n");
        written.push_back(cert);
    }
    const auto summary = dir / "summary.json";
    io::write_text_file(summary.string(), summary_to_json(result).dump(2) + "\n");
    written.push_back(summary);

    const Problem& pb = *result.problem;
    io::json bench;
    bench["plant"] = io::plant_to_json(pb.bench.plant);
    bench["graph"] = io::graph_to_json(pb.bench.graph);
    bench["cost"] = io::cost_to_json(pb.bench.cost);
    bench["q"] = io::to_json(pb.bench.q);
    const auto bpath = dir / "benchmark.json";
    io::write_text_file(bpath.string(), bench.dump(2) + "\n");
    written.push_back(bpath);

    if (result.config.plots) {
        for (auto& p : emit_plots(result, dir)) {
            written.push_back(std::move(p));
        }
    }
    return written;
}

}  // namespace fdgd
