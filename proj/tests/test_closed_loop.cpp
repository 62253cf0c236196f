#include "catch_amalgamated.hpp"

#include "fdgd/certify.hpp"
#include "fdgd/closed_loop_operator.hpp"
#include "fdgd/errors.hpp"

#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <memory>
#include <numeric>
#include <random>

using namespace fdgd;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Loop {
    fdgd::Problem pb;
    double eta;
    AffineClosedLoop loop;
};

Loop make_loop(std::uint64_t seed, std::size_t N, double eta) {
    fdgd::Problem pb = fixture::small_problem(seed, N);
    AffineClosedLoop loop(pb.bench.plant, pb.W, pb.costs, eta, pb.bench.q, pb.opt.u_star, pb.opt.x_star);
    return {std::move(pb), eta, std::move(loop)};
}

}  // namespace

TEST_CASE("affine step matches the simulated closed loop", "[closed_loop]") {
    const Loop l = make_loop(71, 5, 1e-2);
    const auto& plant = l.pb.bench.plant;
    std::mt19937_64 rng(72);
    for (int t = 0; t < 10; ++t) {
        const Vector x = oracle::random_vector(rng, plant.n());
        const Vector u = oracle::random_vector(rng, l.pb.S.stack_size());
        const auto traj = simulate(plant, l.pb.W, l.pb.S, l.pb.costs, l.pb.ctx, l.eta, l.pb.bench.q, x, u, 1);
        const Vector z1 = l.loop.step(l.loop.stack(x, u));
        CHECK((z1.head(plant.n()) - traj.final_x).norm() < 1e-12);
        CHECK((z1.tail(u.size()) - traj.final_u_stack).norm() < 1e-12);
    }
    CHECK(l.loop.state_dim() == plant.n());
    CHECK(l.loop.M().rows() == plant.n() + l.pb.S.stack_size());
}

TEST_CASE("power_apply matches repeated multiplication", "[closed_loop]") {
    const Loop l = make_loop(73, 4, 5e-3);
    std::mt19937_64 rng(74);
    const Vector v = oracle::random_vector(rng, l.loop.M().rows());
    Vector w = v;
    for (std::size_t k = 0; k <= 300; ++k) {
        if (k % 37 == 0 || k < 5) {
            CHECK((l.loop.power_apply(k, v) - w).norm() <= 1e-12 * (1.0 + w.norm()));
        }
        w = l.loop.M() * w;
    }
}

TEST_CASE("fixed point and deviation", "[closed_loop]") {
    const Loop l = make_loop(75, 5, 1e-3);
    const auto& plant = l.pb.bench.plant;
    const Vector z = l.loop.fixed_point();
    CHECK((l.loop.step(z) - z).norm() < 1e-12 * (1.0 + z.norm()));
    CHECK(l.loop.spectral_radius() < 1.0);
    CHECK_THAT(l.loop.spectral_radius(), WithinRel(oracle::eigen_radius(l.loop.M()), 1e-10));

    const Vector x0 = l.pb.maps.state_disturbance_gain * l.pb.bench.q;
    const Vector u0 = Vector::Zero(l.pb.S.stack_size());
    SimulationOptions opts;
    opts.u_star = l.pb.opt.u_star;
    const auto traj = simulate(plant, l.pb.W, l.pb.S, l.pb.costs, l.pb.ctx, l.eta, l.pb.bench.q, x0, u0, 2000, opts);
    const Vector z0 = l.loop.stack(x0, u0);
    for (std::size_t k : {0u, 1u, 10u, 777u, 1999u}) {
        const Vector dev = l.loop.deviation_at(k, z0);
        CHECK_THAT(l.loop.mean_error(dev), WithinAbs(traj.records[k].err_to_opt, 1e-10));
    }
}

TEST_CASE("zero problem has its fixed point at the origin", "[closed_loop][reduction]") {
    fdgd::Benchmark bench = fdgd::generate_benchmark(fixture::small_config(76, 4));
    bench.q.setZero();
    bench.cost.y_ref.setZero();
    const fdgd::Problem pb = fdgd::make_problem(std::move(bench));
    const AffineClosedLoop loop(pb.bench.plant, pb.W, pb.costs, 1e-3, pb.bench.q, pb.opt.u_star, pb.opt.x_star);
    CHECK(loop.fixed_point().norm() == 0.0);
    CHECK(loop.c().norm() == 0.0);
}

TEST_CASE("auto horizon and plateau sampling", "[closed_loop]") {
    const Loop l = make_loop(77, 4, 1e-3);
    const std::size_t K = l.loop.auto_horizon();
    const double lr = std::log(l.loop.spectral_radius());
    CHECK(static_cast<double>(K) * lr <= std::log(1e-12) + 1e-9);
    CHECK(static_cast<double>(K - 1) * lr > std::log(1e-12) - 1e-9);
    CHECK_THROWS_AS(l.loop.auto_horizon(1.5), ParameterError);

    const Vector z0 = l.loop.stack(Vector::Zero(l.pb.bench.plant.n()), Vector::Zero(l.pb.S.stack_size()));
    const PlateauEstimate est = affine_plateau(l.loop, z0);
    CHECK(est.horizon == K);
    CHECK(est.samples == 200);
    REQUIRE(est.sample_steps.size() == 200);
    CHECK(est.sample_steps.front() >= est.window_begin);
    CHECK(est.window_begin >= K - K / 20 - 1);
    CHECK(est.sample_steps.back() <= K);
    const double mean = std::accumulate(est.sample_errors.begin(), est.sample_errors.end(), 0.0) / 200.0;
    CHECK_THAT(est.plateau, WithinRel(mean, 1e-12));
    // At the end of the auto horizon the transient is gone.
    CHECK_THAT(est.plateau, WithinRel(est.fixed_point_error, 1e-6));

    const PlateauEstimate fixed = affine_plateau(l.loop, z0, 1000, 10);
    CHECK(fixed.horizon == 1000);
    CHECK(fixed.samples == 10);
    CHECK_THROWS_AS(affine_plateau(l.loop, z0, 1000, 0), ParameterError);
}

TEST_CASE("fixed-point error is O(eta)", "[closed_loop][property]") {
    const fdgd::Problem pb = fixture::small_problem(78, 6);
    double prev_ratio = 0.0;
    for (double eta : {1e-3, 1e-4, 1e-5, 1e-6}) {
        const AffineClosedLoop loop(pb.bench.plant, pb.W, pb.costs, eta, pb.bench.q, pb.opt.u_star, pb.opt.x_star);
        const double e = loop.mean_error(loop.fixed_point_offset());
        CHECK(e > 0.0);
        const double ratio = e / eta;
        if (prev_ratio > 0.0) {
            CHECK_THAT(ratio, WithinRel(prev_ratio, 0.05));
        }
        prev_ratio = ratio;
    }
}

TEST_CASE("affine loop rejects non-quadratic costs", "[closed_loop]") {
    const fdgd::Problem pb = fixture::small_problem(79, 3);
    std::vector<std::shared_ptr<const AgentCost>> agents;
    for (int i = 0; i < 3; ++i) {
        agents.push_back(std::make_shared<QuadraticAgentCost>(0.1, pb.bench.cost.y_ref, pb.costs.input_dim()));
    }
    const CostModel generic(agents);
    CHECK_THROWS_AS(AffineClosedLoop(pb.bench.plant, pb.W, generic, 1e-3, pb.bench.q, pb.opt.u_star, pb.opt.x_star),
                    UnsupportedError);
    CHECK_THROWS_AS(AffineClosedLoop(pb.bench.plant, pb.W, pb.costs, -1.0, pb.bench.q, pb.opt.u_star, pb.opt.x_star),
                    ParameterError);
}
