#include "catch_amalgamated.hpp"

#include "fdgd/errors.hpp"
#include "fdgd/harness.hpp"
#include "fdgd/numerics.hpp"
#include "fdgd/rng.hpp"
#include "fdgd/serialization.hpp"
#include "fdgd/svg.hpp"

#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

using namespace fdgd;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("fdgd_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        return false;
    }
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (std::memcmp(a.data() + i, b.data() + i, sizeof(double)) != 0) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("config json round trip", "[harness][config]") {
    ExperimentConfig c = fixture::small_config(3, 6);
    c.x0 = "zero";
    c.theta = 0.25;
    c.mode = BoundMode::restricted;
    c.plateau_horizon = "trajectory";
    c.topology = "edges";
    c.edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}};
    c.p = 4;
    const ExperimentConfig back = config_from_json(config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));
    CHECK(back.x0 == "zero");
    CHECK(back.outputs() == 4);
    CHECK(back.mode == BoundMode::restricted);
    CHECK(back.edges.size() == 6);

    const ExperimentConfig def = config_from_json(io::json::object());
    CHECK(def.N == 15);
    CHECK(def.x0 == "equilibrium");
    CHECK(def.plateau_horizon == "auto");
    CHECK(def.outputs() == 15);

    const auto file = load_config(std::string(FDGD_SOURCE_DIR) + "/configs/benchmark.json");
    CHECK(file.seed == 7);
    CHECK(file.etas.size() == 4);
}

TEST_CASE("config validation", "[harness][config]") {
    auto bad = [](const char* key, io::json value) {
        io::json j = io::json::object();
        j[key] = std::move(value);
        return j;
    };
    CHECK_THROWS_AS(config_from_json(bad("N", 0)), ConfigurationError);
    CHECK_THROWS_AS(config_from_json(bad("topology", "star")), ConfigurationError);
    CHECK_THROWS_AS(config_from_json(bad("spectral_scale", 1.0)), ConfigurationError);
    CHECK_THROWS_AS(config_from_json(bad("spectral_scale", 0.0)), ConfigurationError);
    CHECK_THROWS_AS(config_from_json(bad("alpha_range", io::json::array({0.2, 0.1}))), ConfigurationError);
    CHECK_THROWS_AS(config_from_json(bad("alpha_range", io::json::array({0.1}))), ConfigurationError);
    CHECK_THROWS_AS(config_from_json(bad("p", 0)), ConfigurationError);
    CHECK_THROWS_AS(config_from_json(bad("etas", io::json::array())), ConfigurationError);
    CHECK_THROWS_AS(config_from_json(bad("etas", io::json::array({1e-5, -1.0}))), ConfigurationError);
    CHECK_THROWS_AS(config_from_json(bad("x0", "random")), ConfigurationError);
    CHECK_THROWS_AS(config_from_json(bad("theta", 1.5)), ConfigurationError);
    CHECK_THROWS_AS(config_from_json(bad("plateau_horizon", "soon")), ConfigurationError);
    CHECK_THROWS_AS(config_from_json(bad("plateau_horizon", "0")), ConfigurationError);
    CHECK_THROWS_AS(config_from_json(bad("u0", "random")), UnsupportedError);
    CHECK_THROWS_AS(load_config("/nonexistent/fdgd.json"), ConfigurationError);
}

TEST_CASE("benchmark generation is deterministic and well formed", "[harness][benchmark]") {
    const ExperimentConfig c = fixture::small_config(7, 15);
    const Benchmark a = generate_benchmark(c);
    const Benchmark b = generate_benchmark(c);
    CHECK(bitwise_equal(a.plant.A(), b.plant.A()));
    CHECK(bitwise_equal(a.plant.B(), b.plant.B()));
    CHECK(bitwise_equal(a.plant.C(), b.plant.C()));
    CHECK(bitwise_equal(a.plant.E(), b.plant.E()));
    CHECK(bitwise_equal(a.q, b.q));
    CHECK(bitwise_equal(a.cost.alpha, b.cost.alpha));

    CHECK_THAT(numerics::spectral_norm(a.plant.A()), WithinAbs(0.2, 1e-10));
    CHECK(a.plant.is_stable());
    // Circulant: every row is a cyclic shift of the first.
    for (Eigen::Index i = 1; i < 15; ++i) {
        for (Eigen::Index j = 0; j < 15; ++j) {
            CHECK(a.plant.A()(i, j) == a.plant.A()(0, (j - i + 15) % 15));
        }
    }
    CHECK((a.plant.B() - Matrix(a.plant.B().diagonal().asDiagonal())).norm() == 0.0);
    CHECK((a.plant.E() - Matrix(a.plant.E().diagonal().asDiagonal())).norm() == 0.0);
    CHECK(a.plant.D().norm() == 0.0);
    CHECK(a.q.minCoeff() >= 0.0);
    CHECK(a.q.maxCoeff() < 1.0);
    CHECK(a.cost.alpha.minCoeff() >= 0.001);
    CHECK(a.cost.alpha.maxCoeff() <= 0.1);
    CHECK((a.cost.y_ref - Vector::Constant(15, 0.5)).norm() == 0.0);
    CHECK(a.graph.edges().size() == 15);
    CHECK_NOTHROW(validate(a.plant));

    const Benchmark other = generate_benchmark(fixture::small_config(8, 15));
    CHECK_FALSE(bitwise_equal(a.plant.A(), other.plant.A()));

    ExperimentConfig complete = c;
    complete.topology = "complete";
    CHECK(generate_benchmark(complete).graph.edges().size() == 15 * 14 / 2);
}

TEST_CASE("rng streams", "[harness][rng]") {
    rng::Stream s1(42, rng::StreamId::alpha);
    rng::Stream s2(42, rng::StreamId::alpha);
    rng::Stream s3(42, rng::StreamId::graph);
    rng::Stream s4(43, rng::StreamId::alpha);
    bool differs_stream = false;
    bool differs_seed = false;
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t a = s1.next();
        CHECK(a == s2.next());
        differs_stream |= a != s3.next();
        differs_seed |= a != s4.next();
    }
    CHECK(differs_stream);
    CHECK(differs_seed);
    CHECK(rng::splitmix64(0) != rng::splitmix64(1));

    rng::Stream u(5, 0);
    double sum = 0.0;
    double sq = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double x = u.uniform();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        CHECK(u.below(7) < 7);
        const double z = u.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / 20000.0) < 0.05);
    CHECK(std::abs(sq / 20000.0 - 1.0) < 0.05);
}

TEST_CASE("serialization round trips", "[harness][io]") {
    const Problem pb = fixture::small_problem(9, 5);
    const NetworkedPlant plant = io::plant_from_json(io::plant_to_json(pb.bench.plant));
    CHECK(bitwise_equal(plant.A(), pb.bench.plant.A()));
    CHECK(bitwise_equal(plant.C(), pb.bench.plant.C()));
    CHECK(bitwise_equal(plant.E(), pb.bench.plant.E()));
    CHECK(plant.input_dims().total() == 5);

    const ControlGraph g = io::graph_from_json(io::graph_to_json(pb.bench.graph));
    CHECK(g.edges() == pb.bench.graph.edges());

    const QuadraticTrackingCost c = io::cost_from_json(io::cost_to_json(pb.bench.cost), 5);
    CHECK(bitwise_equal(c.alpha, pb.bench.cost.alpha));
    CHECK(bitwise_equal(c.y_ref, pb.bench.cost.y_ref));

    CertifyOptions opts;
    opts.x0 = initial_state(pb, "equilibrium");
    const CertificateReport r = certify(pb.bench.plant, pb.maps, pb.W, pb.costs, opts);
    const io::json j = io::report_to_json(r);
    const CertificateReport back = io::report_from_json(j);
    CHECK(back.eta_bar == r.eta_bar);
    CHECK(back.sigma == r.sigma);
    CHECK(back.c3 == r.c3);
    CHECK(back.error_floor == r.error_floor);
    CHECK(back.mode == r.mode);
    CHECK(bitwise_equal(back.P, r.P));
    CHECK(io::report_to_json(back) == j);

    // NaN fields go out as null and come back as NaN.
    CertificateReport empty;
    const io::json ej = io::report_to_json(empty);
    CHECK(ej.at("sigma").is_null());
    CHECK(std::isnan(io::report_from_json(ej).sigma));
    CHECK_NOTHROW((void)ej.dump());

    CHECK(io::format_double(0.1) == "0.10000000000000001");
    CHECK(std::stod(io::format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK_THROWS_AS(io::matrix_from_json(io::json::array({io::json::array({1, 2}), io::json::array({1})}), "M"),
                    DimensionError);
}

TEST_CASE("trajectory csv round trip", "[harness][io]") {
    const Problem pb = fixture::small_problem(10, 4);
    RunOptions ro;
    ro.steps = 50;
    ro.record_stride = 5;
    const RunSummary run = run_single(pb, 1e-3, ro);
    // One record per stride over k = 0..steps-1.
    REQUIRE(run.records.size() == 10);
    const std::string text = trajectory_csv(run, pb);
    std::istringstream in(text);
    const auto rows = io::read_trajectory_csv(in);
    REQUIRE(rows.size() == run.records.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& rec = run.records[i];
        CHECK(rows[i].k == rec.k);
        CHECK(bitwise_equal(rows[i].y, rec.y));
        CHECK(bitwise_equal(rows[i].input, rec.applied));
        CHECK(rows[i].consensus_err == rec.consensus_error);
        CHECK(rows[i].grad_norm == rec.gamma_norm);
        CHECK(rows[i].storage_U == rec.storage);
        CHECK(rows[i].err_to_opt == rec.err_to_opt);
    }
    const std::string header = text.substr(0, text.find('\n'));
    CHECK(header.rfind("k,y_1,", 0) == 0);
    CHECK(header.find("input_1") != std::string::npos);
    CHECK(header.size() >= std::string(",consensus_err,grad_norm,storage_U,err_to_opt").size());
    CHECK(header.substr(header.size() - 45) == ",consensus_err,grad_norm,storage_U,err_to_opt");

    std::istringstream broken("k,y_1\n0,abc\n");
    CHECK_THROWS_AS(io::read_trajectory_csv(broken), ConfigurationError);
    std::istringstream ragged(text.substr(0, text.find('\n') + 1) + "0,1,2\n");
    CHECK_THROWS_AS(io::read_trajectory_csv(ragged), ConfigurationError);
}

TEST_CASE("svg output is well formed", "[harness][svg]") {
    svg::PlotSpec spec{"t <&> \"q\"", "k", "e", true, 0.5, "ref"};
    std::vector<svg::Series> s(2);
    s[0].label = "a & b";
    s[1].label = "c";
    for (int i = 0; i < 50; ++i) {
        s[0].x.push_back(i);
        s[0].y.push_back(std::exp(-0.1 * i));
        s[1].x.push_back(i);
        s[1].y.push_back(i == 3 ? 0.0 : 1.0 + i);  // dropped on log axis
    }
    const std::string doc = svg::line_plot(spec, s);
    CHECK(oracle::xml_well_formed(doc));
    CHECK(doc == svg::line_plot(spec, s));
    CHECK(doc.find("<svg") != std::string::npos);
    CHECK(svg::escape("<a&\"b>") == "&lt;a&amp;&quot;b&gt;");

    // Degenerate inputs still give a valid document.
    CHECK(oracle::xml_well_formed(svg::line_plot(spec, {})));
    svg::Series flat{"flat", {0, 1, 2}, {1, 1, 1}};
    CHECK(oracle::xml_well_formed(svg::line_plot(svg::PlotSpec{"f", "x", "y"}, {flat})));
    svg::Series nan{"nan", {0, 1}, {std::numeric_limits<double>::quiet_NaN(), 1.0}};
    CHECK(oracle::xml_well_formed(svg::line_plot(svg::PlotSpec{"n", "x", "y"}, {nan})));
}

TEST_CASE("sweep artifacts", "[harness][sweep]") {
    ExperimentConfig c = fixture::small_config(11, 5);
    c.steps = 100;
    c.csv_stride = 10;
    c.plots = true;
    const SweepResult res = run_sweep(c);
    REQUIRE(res.runs.size() == 2);
    const fs::path dir = scratch("sweep");
    const auto written = write_artifacts(res, dir);
    std::set<std::string> names;
    for (const auto& p : written) {
        CHECK(fs::exists(p));
        names.insert(p.filename().string());
    }
    for (const char* n : {"trajectory_0.csv", "trajectory_1.csv", "certificate_0.json", "certificate_1.json",
                          "summary.json", "benchmark.json", "error.svg", "inputs.svg", "outputs.svg"}) {
        CHECK(names.count(n) == 1);
    }
    for (const char* n : {"error.svg", "inputs.svg", "outputs.svg"}) {
        CHECK(oracle::xml_well_formed(slurp(dir / n)));
    }
    const io::json summary = io::read_json_file((dir / "summary.json").string());
    CHECK(summary.at("runs").size() == 2);
    const io::json bench = io::read_json_file((dir / "benchmark.json").string());
    CHECK(bitwise_equal(io::plant_from_json(bench.at("plant")).A(), res.problem->bench.plant.A()));
    std::ifstream csv(dir / "trajectory_0.csv");
    CHECK(io::read_trajectory_csv(csv).size() == 10);

    // Same config, same bytes.
    const fs::path dir2 = scratch("sweep2");
    const auto again = write_artifacts(run_sweep(c), dir2);
    REQUIRE(again.size() == written.size());
    for (const auto& p : written) {
        CHECK(slurp(p) == slurp(dir2 / p.filename()));
    }
}

TEST_CASE("zero-step sweep writes empty valid csvs and skips plots", "[harness][sweep]") {
    ExperimentConfig c = fixture::small_config(12, 4);
    c.steps = 0;
    c.plots = true;
    const SweepResult res = run_sweep(c);
    for (const auto& r : res.runs) {
        CHECK(r.steps_run == 0);
        CHECK_FALSE(r.diverged);
    }
    std::vector<std::string> notices;
    const fs::path dir = scratch("zero");
    CHECK(emit_plots(res, dir, &notices).empty());
    CHECK(notices.size() == 2);
    (void)write_artifacts(res, dir);
    std::ifstream csv(dir / "trajectory_0.csv");
    const auto rows = io::read_trajectory_csv(csv);
    CHECK(rows.size() <= 1);
}

TEST_CASE("halving eta lowers the plateau", "[harness][sweep][property]") {
    for (std::uint64_t seed : {13u, 14u, 15u}) {
        ExperimentConfig c = fixture::small_config(seed, 6);
        c.steps = 10;
        c.etas = {2e-3, 1e-3, 5e-4};
        const SweepResult res = run_sweep(c);
        CHECK(res.runs[1].plateau < res.runs[0].plateau);
        CHECK(res.runs[2].plateau < res.runs[1].plateau);
        for (const auto& r : res.runs) {
            CHECK(r.plateau_source == "affine");
            CHECK(r.plateau > 0.0);
        }
    }
}

TEST_CASE("run_single reports divergence instead of throwing", "[harness]") {
    const Problem pb = fixture::small_problem(16, 4);
    RunOptions ro;
    ro.steps = 5000;
    ro.plateau_horizon = "trajectory";
    const RunSummary r = run_single(pb, 1e3, ro);
    CHECK(r.diverged);
    CHECK(r.above_eta_bar);
    CHECK(r.divergence_step > 0);
    CHECK(r.divergence_step < 5000);
}

TEST_CASE("initial state options", "[harness]") {
    const Problem pb = fixture::small_problem(17, 5);
    CHECK(initial_state(pb, "zero").norm() == 0.0);
    const Vector xe = initial_state(pb, "equilibrium");
    const auto& pl = pb.bench.plant;
    CHECK((pl.A() * xe + pl.E() * pb.bench.q - xe).norm() < 1e-12);
    CHECK_THROWS_AS(initial_state(pb, "bogus"), ConfigurationError);
}
