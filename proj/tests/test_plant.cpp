#include "catch_amalgamated.hpp"

#include "fdgd/controller.hpp"
#include "fdgd/errors.hpp"
#include "fdgd/plant.hpp"

#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <random>

using namespace fdgd;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Block-diagonal random plant with `agents` subsystems of sizes (ni, mi, ri).
NetworkedPlant random_plant(std::mt19937_64& rng, std::size_t agents, Eigen::Index ni, Eigen::Index mi,
                            Eigen::Index ri, Eigen::Index p, double radius) {
    const Eigen::Index n = ni * static_cast<Eigen::Index>(agents);
    const Eigen::Index m = mi * static_cast<Eigen::Index>(agents);
    const Eigen::Index r = ri * static_cast<Eigen::Index>(agents);
    Matrix b = Matrix::Zero(n, m);
    Matrix e = Matrix::Zero(n, r);
    for (std::size_t i = 0; i < agents; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        b.block(k * ni, k * mi, ni, mi) = oracle::random_normal(rng, ni, mi);
        e.block(k * ni, k * ri, ni, ri) = oracle::random_normal(rng, ni, ri);
    }
    PlantMatrices pm{oracle::random_schur(rng, n, radius), b, oracle::random_normal(rng, p, n),
                     oracle::random_normal(rng, p, m), e};
    return NetworkedPlant(pm, Partition::uniform(agents, ni), Partition::uniform(agents, mi),
                          Partition::uniform(agents, ri));
}

}  // namespace

TEST_CASE("partition offsets", "[plant]") {
    const Partition p({2, 0, 3});
    CHECK(p.agents() == 3);
    CHECK(p.total() == 5);
    CHECK(p.offset(0) == 0);
    CHECK(p.offset(1) == 2);
    CHECK(p.offset(2) == 2);
    CHECK(Partition::uniform(4, 2).total() == 8);
    CHECK_THROWS_AS(Partition({1, -1}), DimensionError);
}

TEST_CASE("plant structure checks", "[plant]") {
    PlantMatrices pm{Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2), Matrix::Zero(2, 2),
                     Matrix::Identity(2, 2)};
    const Partition two = Partition::uniform(2, 1);
    CHECK_NOTHROW(NetworkedPlant(pm, two, two, two));

    PlantMatrices coupled = pm;
    coupled.B(0, 1) = 1.0;  // input 2 reaching subsystem 1
    CHECK_THROWS_AS(NetworkedPlant(coupled, two, two, two), DimensionError);

    PlantMatrices wrong = pm;
    wrong.C = Matrix::Identity(2, 3);
    CHECK_THROWS_AS(NetworkedPlant(wrong, two, two, two), DimensionError);
    CHECK_THROWS_AS(NetworkedPlant(pm, two, Partition::uniform(1, 2), two), DimensionError);
}

TEST_CASE("validate: Schur gate and rank warnings", "[plant]") {
    const NetworkedPlant zero_a({Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                                 Matrix::Zero(2, 2), Matrix::Identity(2, 2)},
                                Partition::uniform(2, 1), Partition::uniform(2, 1), Partition::uniform(2, 1));
    const ValidationReport ok = validate(zero_a);
    CHECK(ok.stable);
    CHECK(ok.spectral_radius == 0.0);
    CHECK(ok.controllable);
    CHECK(ok.observable);

    Matrix b = Matrix::Zero(2, 2);
    b(0, 0) = 1.0;  // rank B = 1 < n with A = 0
    const NetworkedPlant weak({Matrix::Zero(2, 2), b, Matrix::Identity(2, 2), Matrix::Zero(2, 2),
                               Matrix::Identity(2, 2)},
                              Partition::uniform(2, 1), Partition::uniform(2, 1), Partition::uniform(2, 1));
    const ValidationReport w = validate(weak);
    CHECK(w.stable);
    CHECK_FALSE(w.controllable);
    CHECK_FALSE(w.warnings.empty());

    const NetworkedPlant unstable({Matrix::Identity(1, 1), Matrix::Identity(1, 1), Matrix::Identity(1, 1),
                                   Matrix::Zero(1, 1), Matrix::Identity(1, 1)},
                                  Partition({1}), Partition({1}), Partition({1}));
    try {
        (void)validate(unstable);
        FAIL("expected StabilityError");
    } catch (const StabilityError& e) {
        CHECK_THAT(e.spectral_radius(), WithinAbs(1.0, 1e-12));
    }
    CHECK_THROWS_AS(steady_state_maps(unstable), StabilityError);
}

TEST_CASE("steady-state maps: hand cases", "[plant]") {
    const auto maps = steady_state_maps(fixture::scalar_plant(0.5, 1.0, 1.0, 0.0, 1.0));
    CHECK_THAT(maps.G(0, 0), WithinRel(2.0, 1e-14));
    CHECK_THAT(maps.H(0, 0), WithinRel(2.0, 1e-14));
    CHECK_THAT(maps.state_input_gain(0, 0), WithinRel(2.0, 1e-14));

    std::mt19937_64 rng(21);
    const Matrix b = oracle::random_normal(rng, 1, 1);
    const Matrix c = oracle::random_normal(rng, 2, 1);
    const Matrix e = oracle::random_normal(rng, 1, 1);
    const Matrix d = oracle::random_normal(rng, 2, 1);
    const NetworkedPlant p({Matrix::Zero(1, 1), b, c, d, e}, Partition({1}), Partition({1}), Partition({1}));
    const auto m0 = steady_state_maps(p);
    CHECK((m0.G - (c * b + d)).norm() < 1e-14);
    CHECK((m0.H - c * e).norm() < 1e-14);
}

TEST_CASE("steady-state consistency by long simulation", "[plant][property]") {
    std::mt19937_64 rng(22);
    for (int t = 0; t < 10; ++t) {
        const NetworkedPlant plant = random_plant(rng, 3, 2, 1, 1, 4, 0.6);
        const SteadyStateMaps maps = steady_state_maps(plant);
        const Vector u = oracle::random_vector(rng, plant.m());
        const Vector q = oracle::random_vector(rng, plant.r());
        const auto steps = static_cast<int>(std::ceil(std::log(1e-14) / std::log(plant.spectral_radius()))) + 50;
        PlantState s{Vector::Zero(plant.n()), 0};
        for (int k = 0; k < steps; ++k) {
            s = step(plant, s, u, q);
        }
        CHECK(s.k == static_cast<std::size_t>(steps));
        CHECK((output(plant, s, u) - (maps.G * u + maps.H * q)).norm() < 1e-8);
        CHECK((s.x - equilibrium_shift(maps, u, q)).norm() < 1e-8);
    }
}

TEST_CASE("plant step and output", "[plant]") {
    std::mt19937_64 rng(23);
    const NetworkedPlant plant = random_plant(rng, 2, 2, 1, 1, 3, 0.5);
    const PlantState zero{Vector::Zero(plant.n()), 0};
    CHECK(step(plant, zero, Vector::Zero(plant.m()), Vector::Zero(plant.r())).x.norm() == 0.0);
    CHECK(output(plant, zero, Vector::Zero(plant.m())).norm() == 0.0);

    PlantMatrices pm = plant.matrices();
    pm.A.setZero();
    const NetworkedPlant a0(pm, plant.state_dims(), plant.input_dims(), plant.disturbance_dims());
    const Vector u = oracle::random_vector(rng, plant.m());
    const Vector q = oracle::random_vector(rng, plant.r());
    const Vector x = oracle::random_vector(rng, plant.n());
    CHECK((step(a0, {x, 0}, u, q).x - (pm.B * u + pm.E * q)).norm() < 1e-14);

    PlantMatrices ci = plant.matrices();
    ci.C = Matrix::Identity(plant.n(), plant.n());
    ci.D = Matrix::Zero(plant.n(), plant.m());
    const NetworkedPlant obs(ci, plant.state_dims(), plant.input_dims(), plant.disturbance_dims());
    CHECK((output(obs, {x, 0}, u) - x).norm() == 0.0);

    CHECK_THROWS_AS(step(plant, zero, Vector::Zero(plant.m() + 1), Vector::Zero(plant.r())), DimensionError);
    CHECK_THROWS_AS(output(plant, zero, Vector::Zero(plant.m() + 1)), DimensionError);
}

TEST_CASE("plant linearity", "[plant][property]") {
    std::mt19937_64 rng(24);
    for (int t = 0; t < 20; ++t) {
        const NetworkedPlant plant = random_plant(rng, 3, 1, 2, 1, 2, 0.9);
        const Vector x = oracle::random_vector(rng, plant.n());
        const Vector u1 = oracle::random_vector(rng, plant.m());
        const Vector u2 = oracle::random_vector(rng, plant.m());
        const Vector q = oracle::random_vector(rng, plant.r());
        const Vector lhs = step(plant, {x, 0}, u1 + u2, q).x - step(plant, {x, 0}, u1, q).x;
        const Vector rhs = step(plant, {Vector::Zero(plant.n()), 0}, u2, Vector::Zero(plant.r())).x;
        CHECK((lhs - rhs).norm() < 1e-12);
    }
}

TEST_CASE("equilibrium shift", "[plant]") {
    const NetworkedPlant plant = fixture::scalar_plant(0.5, 1.0, 1.0, 0.0, 1.0);
    const auto maps = steady_state_maps(plant);
    CHECK(equilibrium_shift(maps, Vector::Zero(1), Vector::Zero(1)).norm() == 0.0);
    // u = 1 applied to subsystem 1: h = (1 - 0.5)^{-1} * 1 = 2.
    const Selector s(plant.input_dims());
    const Vector applied = s.apply(Vector::Ones(1));
    CHECK_THAT(equilibrium_shift(maps, applied, Vector::Zero(1))(0), WithinRel(2.0, 1e-14));
    CHECK_THROWS_AS(equilibrium_shift(maps, Vector::Zero(2), Vector::Zero(1)), DimensionError);
}

TEST_CASE("x-tilde dynamics along a closed-loop trajectory", "[plant][property]") {
    const fdgd::Problem pb = fixture::small_problem(5, 4);
    const auto& plant = pb.bench.plant;
    SimulationOptions opts;
    opts.record_stride = 1;
    const Vector x0 = Vector::Zero(plant.n());
    const Vector u0 = Vector::Zero(pb.S.stack_size());
    const double eta = 1e-2;  // large enough for the inputs to move visibly
    const auto traj = simulate(plant, pb.W, pb.S, pb.costs, pb.ctx, eta, pb.bench.q, x0, u0, 60, opts);
    auto h = [&](const Vector& u_stack) { return equilibrium_shift(pb.maps, pb.S.apply(u_stack), pb.bench.q); };
    for (std::size_t k = 0; k + 1 < traj.records.size(); ++k) {
        const auto& r = traj.records[k];
        const auto& r1 = traj.records[k + 1];
        const Vector xt = r.x - h(r.u_stack);
        const Vector xt1 = r1.x - h(r1.u_stack);
        const Vector pred = plant.A() * xt + h(r.u_stack) - h(r1.u_stack);
        CHECK((xt1 - pred).norm() < 1e-10);
    }
}
