#pragma once

#include "fdgd/numerics.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

namespace fdgd {

using numerics::Matrix;
using numerics::Vector;
using ConstVectorRef = Eigen::Ref<const Vector>;
using VectorRef = Eigen::Ref<Vector>;

// One agent's steady-state cost Phi_i(u, y) over the full input u in R^m and
// the global output y in R^p. Evaluated at arbitrary (u, y); the controller
// feeds measured outputs, not model predictions.
class AgentCost {
public:
    virtual ~AgentCost() = default;

    [[nodiscard]] virtual Eigen::Index input_dim() const = 0;
    [[nodiscard]] virtual Eigen::Index output_dim() const = 0;

    [[nodiscard]] virtual double value(ConstVectorRef u, ConstVectorRef y) const = 0;
    virtual void gradient_into(ConstVectorRef u, ConstVectorRef y, VectorRef grad_u, VectorRef grad_y) const = 0;

    // Lipschitz constant of the joint gradient (u, y) -> grad Phi_i.
    [[nodiscard]] virtual double lipschitz_constant() const = 0;
    // Joint strong convexity modulus; 0 for merely convex costs.
    [[nodiscard]] virtual double convexity_modulus() const { return 0.0; }

    // min over (u, y). The default locates a stationary point by gradient
    // descent with stepsize 1/L from the origin (gradient norm < 1e-9).
    [[nodiscard]] virtual double optimal_value() const;

    // Stacked (grad_u, grad_y).
    [[nodiscard]] Vector gradient(const Vector& u, const Vector& y) const;
};

// 1/2 (alpha ||u||^2 + ||y - y_ref||^2): the tracking cost with R_i = alpha I_m
// and output weight Q_out = I_p.
class QuadraticAgentCost final : public AgentCost {
public:
    QuadraticAgentCost(double alpha, Vector y_ref, Eigen::Index input_dim);

    [[nodiscard]] Eigen::Index input_dim() const override { return input_dim_; }
    [[nodiscard]] Eigen::Index output_dim() const override { return y_ref_.size(); }
    [[nodiscard]] double value(ConstVectorRef u, ConstVectorRef y) const override;
    void gradient_into(ConstVectorRef u, ConstVectorRef y, VectorRef grad_u, VectorRef grad_y) const override;
    // Hessian is diag(alpha I, I).
    [[nodiscard]] double lipschitz_constant() const override { return std::max(alpha_, 1.0); }
    [[nodiscard]] double convexity_modulus() const override { return std::min(alpha_, 1.0); }
    [[nodiscard]] double optimal_value() const override { return 0.0; }

    [[nodiscard]] double alpha() const noexcept { return alpha_; }
    [[nodiscard]] const Vector& y_ref() const noexcept { return y_ref_; }

private:
    double alpha_;
    Vector y_ref_;
    Eigen::Index input_dim_;
};

// 1/2 alpha ||u||^2 + sum_j log cosh(y_j - y_ref_j). Smooth and convex but not
// quadratic; the output term has curvature sech^2 in (0, 1].
class LogCoshTrackingCost final : public AgentCost {
public:
    LogCoshTrackingCost(double alpha, Vector y_ref, Eigen::Index input_dim);

    [[nodiscard]] Eigen::Index input_dim() const override { return input_dim_; }
    [[nodiscard]] Eigen::Index output_dim() const override { return y_ref_.size(); }
    [[nodiscard]] double value(ConstVectorRef u, ConstVectorRef y) const override;
    void gradient_into(ConstVectorRef u, ConstVectorRef y, VectorRef grad_u, VectorRef grad_y) const override;
    [[nodiscard]] double lipschitz_constant() const override { return std::max(alpha_, 1.0); }
    [[nodiscard]] double optimal_value() const override { return 0.0; }

private:
    double alpha_;
    Vector y_ref_;
    Eigen::Index input_dim_;
};

// Quadratic tracking problem family: per-agent input weights alpha_i, common
// reference y_ref, Q_out = I.
struct QuadraticTrackingCost {
    Vector alpha;
    Vector y_ref;
    Eigen::Index input_dim = 0;

    [[nodiscard]] std::size_t agents() const noexcept { return static_cast<std::size_t>(alpha.size()); }
    void validate() const;
};

class CostModel {
public:
    explicit CostModel(std::vector<std::shared_ptr<const AgentCost>> agents);
    explicit CostModel(const QuadraticTrackingCost& quadratic);

    [[nodiscard]] std::size_t agents() const noexcept { return agents_.size(); }
    [[nodiscard]] const AgentCost& agent(std::size_t i) const { return *agents_.at(i); }
    [[nodiscard]] Eigen::Index input_dim() const { return agents_.front()->input_dim(); }
    [[nodiscard]] Eigen::Index output_dim() const { return agents_.front()->output_dim(); }

    // Present when the model was built from a QuadraticTrackingCost; unlocks
    // closed-form optimizer, modulus and the affine closed-loop operator.
    [[nodiscard]] const std::optional<QuadraticTrackingCost>& quadratic() const noexcept { return quadratic_; }

    // Override the joint modulus of sum_i Phi_i (and optionally assert strong
    // convexity). Negative values raise ParameterError.
    void declare_modulus(double nu, bool strongly_convex);
    [[nodiscard]] std::optional<double> declared_modulus() const noexcept { return declared_modulus_; }
    [[nodiscard]] bool strongly_convex() const noexcept;

    // Sum_i Phi_i(u_(i), y) summed over the agents.
    [[nodiscard]] double total_value(const Vector& u, const Vector& y) const;

private:
    std::vector<std::shared_ptr<const AgentCost>> agents_;
    std::optional<QuadraticTrackingCost> quadratic_;
    std::optional<double> declared_modulus_;
    bool declared_strong_ = false;
};

// Pi^T = [I_m  G^T] with its norm and the aggregate constant
// L_Phi = ||Pi|| * sum_i L_Phi_i.
struct ProjectedGradientContext {
    Matrix G;
    Matrix Pi_T;
    double norm_Pi = 1.0;
    double L_Phi = 0.0;
};

[[nodiscard]] ProjectedGradientContext make_gradient_context(const Matrix& G, const CostModel& costs);

// Pi^T grad Phi_i(u, y) = grad_u Phi_i + G^T grad_y Phi_i.
[[nodiscard]] Vector projected_gradient(const ProjectedGradientContext& ctx, const AgentCost& cost,
                                        const Vector& u, const Vector& y);

// Allocation-free variant for inner loops; `work_y` must have length p.
void projected_gradient_into(const ProjectedGradientContext& ctx, const AgentCost& cost, ConstVectorRef u,
                             ConstVectorRef y, VectorRef out, Vector& work_y);

// Block i: projected gradient of agent i at (u_(i), y).
[[nodiscard]] Vector gradient_stack(const ProjectedGradientContext& ctx, const CostModel& costs,
                                    const Vector& u_stack, const Vector& y);

class GradientWorkspace {
public:
    explicit GradientWorkspace(Eigen::Index p) : work_y(Vector::Zero(p)) {}
    Vector work_y;
};

void gradient_stack_into(const ProjectedGradientContext& ctx, const CostModel& costs, const Vector& u_stack,
                         const Vector& y, Vector& out, GradientWorkspace& work);

[[nodiscard]] double total_lipschitz(const ProjectedGradientContext& ctx, const CostModel& costs);

// Joint modulus of (u, y) -> sum_i Phi_i. Quadratic: min(sum alpha_i, N).
// Declared value otherwise, falling back to sum_i nu_i.
[[nodiscard]] double convexity_modulus(const CostModel& costs);

// Phi^opt = sum_i min Phi_i.
[[nodiscard]] double optimal_value(const CostModel& costs);

}  // namespace fdgd
