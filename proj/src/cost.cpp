#include "fdgd/cost.hpp"

#include "fdgd/errors.hpp"

#include <cmath>
#include <sstream>

namespace fdgd {

namespace {

void check_dims(const AgentCost& cost, Eigen::Index u, Eigen::Index y) {
    if (u != cost.input_dim() || y != cost.output_dim()) {
        std::ostringstream os;
        os << "cost evaluated at (u, y) of sizes (" << u << ", " << y << "), expected (" << cost.input_dim()
           << ", " << cost.output_dim() << ")";
        throw DimensionError(os.str());
    }
}

double log_cosh(double x) {
    const double a = std::abs(x);
    return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

}  // namespace

Vector AgentCost::gradient(const Vector& u, const Vector& y) const {
    check_dims(*this, u.size(), y.size());
    Vector g(u.size() + y.size());
    gradient_into(u, y, g.head(u.size()), g.tail(y.size()));
    return g;
}

double AgentCost::optimal_value() const {
    const double lipschitz = lipschitz_constant();
    if (!(lipschitz > 0.0)) {
        throw ParameterError("cost Lipschitz constant must be positive");
    }
    const double step = 1.0 / lipschitz;
    Vector u = Vector::Zero(input_dim());
    Vector y = Vector::Zero(output_dim());
    Vector gu(u.size());
    Vector gy(y.size());
    const double start = value(u, y);
    for (long iter = 0; iter < 10'000'000; ++iter) {
        gradient_into(u, y, gu, gy);
        const double gnorm = std::sqrt(gu.squaredNorm() + gy.squaredNorm());
        if (gnorm < 1e-9) {
            return value(u, y);
        }
        u -= step * gu;
        y -= step * gy;
        const double v = value(u, y);
        if (!std::isfinite(v) || v < start - 1e12 * (1.0 + std::abs(start))) {
            throw ParameterError("cost is not lower bounded");
        }
    }
    throw ParameterError("cost has no attainable minimum (descent did not reach a stationary point)");
}

QuadraticAgentCost::QuadraticAgentCost(double alpha, Vector y_ref, Eigen::Index input_dim)
    : alpha_(alpha), y_ref_(std::move(y_ref)), input_dim_(input_dim) {
    if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) {
        throw ParameterError("quadratic cost weight alpha must be positive");
    }
    numerics::require_finite(y_ref_, "y_ref");
}

double QuadraticAgentCost::value(ConstVectorRef u, ConstVectorRef y) const {
    check_dims(*this, u.size(), y.size());
    return 0.5 * (alpha_ * u.squaredNorm() + (y - y_ref_).squaredNorm());
}

void QuadraticAgentCost::gradient_into(ConstVectorRef u, ConstVectorRef y, VectorRef grad_u,
                                       VectorRef grad_y) const {
    grad_u = alpha_ * u;
    grad_y = y - y_ref_;
}

LogCoshTrackingCost::LogCoshTrackingCost(double alpha, Vector y_ref, Eigen::Index input_dim)
    : alpha_(alpha), y_ref_(std::move(y_ref)), input_dim_(input_dim) {
    if (!(alpha_ > 0.0)) {
        throw ParameterError("log-cosh cost weight alpha must be positive");
    }
}

double LogCoshTrackingCost::value(ConstVectorRef u, ConstVectorRef y) const {
    check_dims(*this, u.size(), y.size());
    double out = 0.5 * alpha_ * u.squaredNorm();
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        out += log_cosh(y(j) - y_ref_(j));
    }
    return out;
}

void LogCoshTrackingCost::gradient_into(ConstVectorRef u, ConstVectorRef y, VectorRef grad_u,
                                        VectorRef grad_y) const {
    grad_u = alpha_ * u;
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        grad_y(j) = std::tanh(y(j) - y_ref_(j));
    }
}

void QuadraticTrackingCost::validate() const {
    if (alpha.size() == 0) {
        throw DimensionError("quadratic tracking cost needs at least one agent");
    }
    if (input_dim <= 0 || y_ref.size() == 0) {
        throw DimensionError("quadratic tracking cost needs positive input and output dimensions");
    }
    for (Eigen::Index i = 0; i < alpha.size(); ++i) {
        if (!(alpha(i) > 0.0) || !std::isfinite(alpha(i))) {
            throw ParameterError("quadratic tracking weights alpha_i must be positive");
        }
    }
    numerics::require_finite(y_ref, "y_ref");
}

CostModel::CostModel(std::vector<std::shared_ptr<const AgentCost>> agents) : agents_(std::move(agents)) {
    if (agents_.empty()) {
        throw DimensionError("cost model needs at least one agent");
    }
    for (const auto& a : agents_) {
        if (!a) {
            throw ParameterError("cost model contains a null agent cost");
        }
        if (a->input_dim() != agents_.front()->input_dim() || a->output_dim() != agents_.front()->output_dim()) {
            throw DimensionError("all agent costs must share the same (m, p)");
        }
        if (!(a->lipschitz_constant() > 0.0)) {
            throw ParameterError("agent cost Lipschitz constants must be positive");
        }
    }
}

CostModel::CostModel(const QuadraticTrackingCost& quadratic) : quadratic_(quadratic) {
    quadratic.validate();
    for (Eigen::Index i = 0; i < quadratic.alpha.size(); ++i) {
        agents_.push_back(
            std::make_shared<QuadraticAgentCost>(quadratic.alpha(i), quadratic.y_ref, quadratic.input_dim));
    }
}

void CostModel::declare_modulus(double nu, bool strongly_convex) {
    if (!(nu >= 0.0) || !std::isfinite(nu)) {
        throw ParameterError("declared convexity modulus must be nonnegative");
    }
    declared_modulus_ = nu;
    declared_strong_ = strongly_convex;
}

bool CostModel::strongly_convex() const noexcept {
    if (declared_modulus_) {
        return declared_strong_ && *declared_modulus_ > 0.0;
    }
    return quadratic_.has_value();
}

double CostModel::total_value(const Vector& u, const Vector& y) const {
    const Eigen::Index m = input_dim();
    if (u.size() != m * static_cast<Eigen::Index>(agents_.size())) {
        throw DimensionError("total_value: stack length must equal m * N");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        total += agents_[i]->value(u.segment(static_cast<Eigen::Index>(i) * m, m), y);
    }
    return total;
}

ProjectedGradientContext make_gradient_context(const Matrix& G, const CostModel& costs) {
    if (G.rows() != costs.output_dim() || G.cols() != costs.input_dim()) {
        throw DimensionError("steady-state map G does not match the cost dimensions");
    }
    ProjectedGradientContext ctx;
    ctx.G = G;
    const Eigen::Index m = G.cols();
    ctx.Pi_T.resize(m, m + G.rows());
    ctx.Pi_T << Matrix::Identity(m, m), G.transpose();
    ctx.norm_Pi = numerics::spectral_norm(ctx.Pi_T);
    double sum = 0.0;
    for (std::size_t i = 0; i < costs.agents(); ++i) {
        sum += costs.agent(i).lipschitz_constant();
    }
    ctx.L_Phi = ctx.norm_Pi * sum;
    return ctx;
}

void projected_gradient_into(const ProjectedGradientContext& ctx, const AgentCost& cost, ConstVectorRef u,
                             ConstVectorRef y, VectorRef out, Vector& work_y) {
    cost.gradient_into(u, y, out, work_y);
    out.noalias() += ctx.G.transpose() * work_y;
}

Vector projected_gradient(const ProjectedGradientContext& ctx, const AgentCost& cost, const Vector& u,
                          const Vector& y) {
    check_dims(cost, u.size(), y.size());
    if (ctx.G.rows() != y.size() || ctx.G.cols() != u.size()) {
        throw DimensionError("projected_gradient: context does not match (u, y)");
    }
    Vector out(u.size());
    Vector work(y.size());
    projected_gradient_into(ctx, cost, u, y, out, work);
    return out;
}

void gradient_stack_into(const ProjectedGradientContext& ctx, const CostModel& costs, const Vector& u_stack,
                         const Vector& y, Vector& out, GradientWorkspace& work) {
    const Eigen::Index m = costs.input_dim();
    const auto n = static_cast<Eigen::Index>(costs.agents());
    if (u_stack.size() != m * n || y.size() != costs.output_dim() || ctx.G.rows() != y.size()) {
        throw DimensionError("gradient_stack: stack or output dimension mismatch");
    }
    out.resize(u_stack.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        projected_gradient_into(ctx, costs.agent(static_cast<std::size_t>(i)), u_stack.segment(i * m, m), y,
                                out.segment(i * m, m), work.work_y);
    }
}

Vector gradient_stack(const ProjectedGradientContext& ctx, const CostModel& costs, const Vector& u_stack,
                      const Vector& y) {
    Vector out;
    GradientWorkspace work(y.size());
    gradient_stack_into(ctx, costs, u_stack, y, out, work);
    return out;
}

double total_lipschitz(const ProjectedGradientContext& ctx, const CostModel& costs) {
    double sum = 0.0;
    for (std::size_t i = 0; i < costs.agents(); ++i) {
        sum += costs.agent(i).lipschitz_constant();
    }
    return ctx.norm_Pi * sum;
}

double convexity_modulus(const CostModel& costs) {
    if (costs.declared_modulus()) {
        return *costs.declared_modulus();
    }
    if (const auto& q = costs.quadratic()) {
        // lambda_min of diag(sum_i R_i, N Q_out).
        return std::min(q->alpha.sum(), static_cast<double>(q->agents()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < costs.agents(); ++i) {
        const double nu = costs.agent(i).convexity_modulus();
        if (nu < 0.0) {
            throw ParameterError("agent convexity modulus must be nonnegative");
        }
        sum += nu;
    }
    return sum;
}

double optimal_value(const CostModel& costs) {
    double total = 0.0;
    for (std::size_t i = 0; i < costs.agents(); ++i) {
        total += costs.agent(i).optimal_value();
    }
    return total;
}

}  // namespace fdgd
