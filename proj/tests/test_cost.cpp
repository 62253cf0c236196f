#include "catch_amalgamated.hpp"

#include "fdgd/cost.hpp"
#include "fdgd/errors.hpp"

#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <memory>
#include <random>

using namespace fdgd;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Quadratic tracking cost plus a constant, relying on the default
// descent-based optimal_value().
class ShiftedCost final : public AgentCost {
public:
    ShiftedCost(double alpha, Vector y_ref, Eigen::Index m, double shift)
        : base_(alpha, std::move(y_ref), m), shift_(shift) {}
    Eigen::Index input_dim() const override { return base_.input_dim(); }
    Eigen::Index output_dim() const override { return base_.output_dim(); }
    double value(ConstVectorRef u, ConstVectorRef y) const override { return base_.value(u, y) + shift_; }
    void gradient_into(ConstVectorRef u, ConstVectorRef y, VectorRef gu, VectorRef gy) const override {
        base_.gradient_into(u, y, gu, gy);
    }
    double lipschitz_constant() const override { return base_.lipschitz_constant(); }

private:
    QuadraticAgentCost base_;
    double shift_;
};

// Linear in y: unbounded below.
class LinearCost final : public AgentCost {
public:
    Eigen::Index input_dim() const override { return 1; }
    Eigen::Index output_dim() const override { return 1; }
    double value(ConstVectorRef, ConstVectorRef y) const override { return y(0); }
    void gradient_into(ConstVectorRef, ConstVectorRef, VectorRef gu, VectorRef gy) const override {
        gu.setZero();
        gy.setOnes();
    }
    double lipschitz_constant() const override { return 1.0; }
};

double fd_rel_error(const AgentCost& cost, const ProjectedGradientContext& ctx, const Vector& u, const Vector& y0) {
    // u -> Phi(u, G u + (y0 - G u0)): its derivative at u0 is Pi^T grad Phi.
    const Vector offset = y0 - ctx.G * u;
    auto f = [&](const Vector& v) { return cost.value(v, ctx.G * v + offset); };
    const Vector fd = oracle::central_difference(f, u, 1e-5);
    const Vector an = projected_gradient(ctx, cost, u, y0);
    return (fd - an).norm() / std::max(1.0, an.norm());
}

}  // namespace

TEST_CASE("quadratic agent cost values", "[cost]") {
    const Vector yref = Vector::Constant(3, 0.5);
    const QuadraticAgentCost c(0.1, yref, 2);
    CHECK(c.value(Vector::Zero(2), yref) == 0.0);
    const Vector g = c.gradient(Vector::Zero(2), yref);
    CHECK(g.norm() == 0.0);
    CHECK(c.lipschitz_constant() == 1.0);
    CHECK(c.convexity_modulus() == 0.1);
    CHECK(c.optimal_value() == 0.0);
    Vector u(2);
    u << 1.0, -2.0;
    // 1/2 (0.1 * 5 + 3 * 0.25)
    CHECK_THAT(c.value(u, Vector::Zero(3)), WithinRel(0.5 * (0.5 + 0.75), 1e-15));
    CHECK_THROWS_AS(QuadraticAgentCost(0.0, yref, 2), ParameterError);
    CHECK_THROWS_AS(LogCoshTrackingCost(-1.0, yref, 2), ParameterError);
}

TEST_CASE("projected gradient scalar hand case", "[cost]") {
    // G = 2, alpha = 1, y_ref = 0, u = 1, y = 3: 1 * 1 + 2 * 3 = 7.
    QuadraticTrackingCost q{Vector::Ones(1), Vector::Zero(1), 1};
    const CostModel costs(q);
    const auto ctx = make_gradient_context(fixture::scalar(2.0), costs);
    const Vector g = projected_gradient(ctx, costs.agent(0), Vector::Ones(1), Vector::Constant(1, 3.0));
    CHECK_THAT(g(0), WithinRel(7.0, 1e-15));
    CHECK_THAT(ctx.norm_Pi, WithinRel(std::sqrt(5.0), 1e-14));
    CHECK_THROWS_AS(projected_gradient(ctx, costs.agent(0), Vector::Ones(2), Vector::Ones(1)), DimensionError);
}

TEST_CASE("finite-difference gradient consistency", "[cost][property]") {
    std::mt19937_64 rng(41);
    const Eigen::Index m = 4;
    const Eigen::Index p = 3;
    const Matrix G = oracle::random_normal(rng, p, m);
    const Vector yref = oracle::random_vector(rng, p);
    const CostModel quad(std::vector<std::shared_ptr<const AgentCost>>{
        std::make_shared<QuadraticAgentCost>(0.3, yref, m)});
    const CostModel lc(std::vector<std::shared_ptr<const AgentCost>>{
        std::make_shared<LogCoshTrackingCost>(0.3, yref, m)});
    const auto ctx_q = make_gradient_context(G, quad);
    const auto ctx_l = make_gradient_context(G, lc);
    for (int t = 0; t < 100; ++t) {
        const Vector u = oracle::random_vector(rng, m, 2.0);
        const Vector y = oracle::random_vector(rng, p, 2.0);
        CHECK(fd_rel_error(quad.agent(0), ctx_q, u, y) < 1e-5);
        CHECK(fd_rel_error(lc.agent(0), ctx_l, u, y) < 1e-5);
        // Raw (u, y) gradient against FD of value.
        const Vector uy = (Vector(m + p) << u, y).finished();
        const auto& c = lc.agent(0);
        auto f = [&](const Vector& z) { return c.value(z.head(m), z.tail(p)); };
        const Vector fd = oracle::central_difference(f, uy, 1e-5);
        CHECK((fd - c.gradient(u, y)).norm() <= 1e-5 * std::max(1.0, fd.norm()));
    }
}

TEST_CASE("gradient stack", "[cost]") {
    std::mt19937_64 rng(42);
    const Matrix G = oracle::random_normal(rng, 3, 2);
    QuadraticTrackingCost q{Vector::Constant(1, 0.2), Vector::Constant(3, 0.5), 2};
    const CostModel one(q);
    const auto ctx = make_gradient_context(G, one);
    const Vector u = oracle::random_vector(rng, 2);
    const Vector y = oracle::random_vector(rng, 3);
    CHECK((gradient_stack(ctx, one, u, y) - projected_gradient(ctx, one.agent(0), u, y)).norm() == 0.0);

    // Stationary point of the N-agent composite, shared by all copies.
    QuadraticTrackingCost qn{Vector::LinSpaced(3, 0.1, 0.3), Vector::Constant(3, 0.5), 2};
    const CostModel costs(qn);
    const auto ctx3 = make_gradient_context(G, costs);
    const Matrix normal = qn.alpha.sum() * Matrix::Identity(2, 2) + 3.0 * G.transpose() * G;
    const Vector ustar = normal.ldlt().solve(3.0 * G.transpose() * qn.y_ref);
    Vector stack(6);
    stack << ustar, ustar, ustar;
    const Vector gs = gradient_stack(ctx3, costs, stack, G * ustar);
    Vector sum = Vector::Zero(2);
    for (int i = 0; i < 3; ++i) {
        sum += gs.segment(2 * i, 2);
    }
    CHECK(sum.norm() < 1e-13);

    Vector out;
    GradientWorkspace work(3);
    gradient_stack_into(ctx3, costs, stack, G * ustar, out, work);
    CHECK((out - gs).norm() == 0.0);
    CHECK_THROWS_AS(gradient_stack(ctx3, costs, Vector::Zero(5), G * ustar), DimensionError);
}

TEST_CASE("Lipschitz constants and the certificate inequality", "[cost][property]") {
    QuadraticTrackingCost two{Vector::Constant(2, 0.5), Vector::Zero(2), 3};
    const CostModel costs(two);
    const auto ctx0 = make_gradient_context(Matrix::Zero(2, 3), costs);
    CHECK(ctx0.norm_Pi == 1.0);
    CHECK_THAT(total_lipschitz(ctx0, costs), WithinRel(2.0, 1e-15));

    const fdgd::Problem pb = fixture::small_problem(3, 6);
    for (std::size_t i = 0; i < pb.costs.agents(); ++i) {
        CHECK(pb.costs.agent(i).lipschitz_constant() == 1.0);
    }
    CHECK_THAT(pb.ctx.L_Phi, WithinRel(pb.ctx.norm_Pi * 6.0, 1e-15));
    CHECK_THAT(pb.ctx.norm_Pi, WithinRel(numerics::spectral_norm(pb.ctx.Pi_T), 1e-14));

    std::mt19937_64 rng(43);
    const Eigen::Index m = pb.costs.input_dim();
    const Eigen::Index p = pb.costs.output_dim();
    for (int t = 0; t < 1000; ++t) {
        const Vector u = oracle::random_vector(rng, m, 3.0);
        const Vector y = oracle::random_vector(rng, p, 3.0);
        const Vector u2 = oracle::random_vector(rng, m, 3.0);
        const Vector y2 = oracle::random_vector(rng, p, 3.0);
        const double dist = std::sqrt((u - u2).squaredNorm() + (y - y2).squaredNorm());
        Vector total = Vector::Zero(m);
        for (std::size_t i = 0; i < pb.costs.agents(); ++i) {
            const Vector d = projected_gradient(pb.ctx, pb.costs.agent(i), u, y) -
                             projected_gradient(pb.ctx, pb.costs.agent(i), u2, y2);
            CHECK(d.norm() <= pb.ctx.norm_Pi * pb.costs.agent(i).lipschitz_constant() * dist * (1.0 + 1e-12));
            total += d;
        }
        CHECK(total.norm() <= pb.ctx.L_Phi * dist * (1.0 + 1e-12));
    }
}

TEST_CASE("convexity modulus", "[cost]") {
    QuadraticTrackingCost one{Vector::Ones(1), Vector::Zero(2), 1};
    CHECK(convexity_modulus(CostModel(one)) == 1.0);
    QuadraticTrackingCost many{Vector::Constant(4, 0.01), Vector::Zero(2), 1};
    CHECK_THAT(convexity_modulus(CostModel(many)), WithinRel(0.04, 1e-15));

    CostModel lc(std::vector<std::shared_ptr<const AgentCost>>{
        std::make_shared<LogCoshTrackingCost>(0.5, Vector::Zero(1), 1)});
    CHECK(convexity_modulus(lc) == 0.0);
    CHECK_FALSE(lc.strongly_convex());
    lc.declare_modulus(0.25, true);
    CHECK(convexity_modulus(lc) == 0.25);
    CHECK(lc.strongly_convex());
    CHECK_THROWS_AS(lc.declare_modulus(-1.0, false), ParameterError);
}

TEST_CASE("restricted strong convexity on the benchmark composite", "[cost][property]") {
    const fdgd::Problem pb = fixture::small_problem(4, 5);
    const double nu = convexity_modulus(pb.costs);
    const Vector hq = pb.maps.H * pb.bench.q;
    auto grad_f = [&](const Vector& u) {
        const Vector y = pb.maps.G * u + hq;
        Vector g = Vector::Zero(u.size());
        for (std::size_t i = 0; i < pb.costs.agents(); ++i) {
            g += projected_gradient(pb.ctx, pb.costs.agent(i), u, y);
        }
        return g;
    };
    const Vector& us = pb.opt.u_star;
    CHECK(grad_f(us).norm() < 1e-10);
    std::mt19937_64 rng(44);
    for (int t = 0; t < 200; ++t) {
        const Vector z = us + oracle::random_vector(rng, us.size(), 0.5);
        const Vector dz = z - us;
        CHECK((grad_f(z) - grad_f(us)).dot(dz) >= nu * dz.squaredNorm() * (1.0 - 1e-12));
    }
}

TEST_CASE("optimal values", "[cost]") {
    QuadraticTrackingCost q{Vector::Constant(3, 0.1), Vector::Constant(2, 0.5), 1};
    CHECK(optimal_value(CostModel(q)) == 0.0);

    const ShiftedCost shifted(0.5, Vector::Constant(2, 0.5), 1, 5.0);
    CHECK_THAT(shifted.optimal_value(), WithinAbs(5.0, 1e-12));
    const LogCoshTrackingCost lc(0.5, Vector::Constant(2, -1.0), 1);
    CHECK(lc.optimal_value() == 0.0);
    // The generic path must find the same minimum as the override.
    CHECK_THAT(lc.AgentCost::optimal_value(), WithinAbs(0.0, 1e-12));

    const LinearCost lin;
    CHECK_THROWS_AS(lin.optimal_value(), ParameterError);
}

TEST_CASE("cost model construction", "[cost]") {
    CHECK_THROWS_AS(CostModel(std::vector<std::shared_ptr<const AgentCost>>{}), DimensionError);
    CHECK_THROWS_AS(CostModel(std::vector<std::shared_ptr<const AgentCost>>{nullptr}), ParameterError);
    CHECK_THROWS_AS(CostModel(std::vector<std::shared_ptr<const AgentCost>>{
                        std::make_shared<QuadraticAgentCost>(1.0, Vector::Zero(2), 1),
                        std::make_shared<QuadraticAgentCost>(1.0, Vector::Zero(3), 1)}),
                    DimensionError);
    QuadraticTrackingCost bad{Vector::Constant(2, -0.1), Vector::Zero(2), 1};
    CHECK_THROWS_AS(CostModel(bad), ParameterError);

    QuadraticTrackingCost q{Vector::Constant(2, 0.5), Vector::Constant(1, 1.0), 1};
    const CostModel costs(q);
    CHECK(costs.quadratic().has_value());
    CHECK(costs.strongly_convex());
    Vector stack(2);
    stack << 1.0, 2.0;
    // agent 0 uses u_(0) = 1, agent 1 uses u_(1) = 2; y = 0.
    CHECK_THAT(costs.total_value(stack, Vector::Zero(1)), WithinRel(0.5 * (0.5 + 1) + 0.5 * (2.0 + 1), 1e-15));
}
