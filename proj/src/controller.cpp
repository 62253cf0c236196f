#include "fdgd/controller.hpp"

#include "fdgd/errors.hpp"

#include <cmath>
#include <sstream>

namespace fdgd {

namespace {

void require_eta(double eta) {
    // eta = 0 is admitted so the pure-consensus limit can be exercised.
    if (!(eta >= 0.0) || !std::isfinite(eta)) {
        throw ParameterError("stepsize eta must be a finite nonnegative number");
    }
}

void require_stack(const Vector& u_stack, const CostModel& costs, const char* where) {
    const Eigen::Index expected = costs.input_dim() * static_cast<Eigen::Index>(costs.agents());
    if (u_stack.size() != expected) {
        std::ostringstream os;
        os << where << ": stack has length " << u_stack.size() << ", expected m * N = " << expected;
        throw DimensionError(os.str());
    }
}

void centralized_gradient_into(const ProjectedGradientContext& ctx, const CostModel& costs, const Vector& u,
                               const Vector& y, Vector& gamma, Vector& tmp, GradientWorkspace& work) {
    projected_gradient_into(ctx, costs.agent(0), u, y, gamma, work.work_y);
    for (std::size_t i = 1; i < costs.agents(); ++i) {
        projected_gradient_into(ctx, costs.agent(i), u, y, tmp, work.work_y);
        gamma += tmp;
    }
}

// Shared closed-loop driver. `Law` supplies the controller-specific pieces:
//   applied(u, out), gradient(u, y, gamma), advance(u, gamma, u_next),
//   consensus(u, average, error), error(u) -> e^k.
template <typename Law>
ClosedLoopTrajectory run_loop(const NetworkedPlant& plant, Law& law, const Vector& q, const Vector& x0,
                              const Vector& u0, std::size_t steps, const SimulationOptions& options) {
    if (x0.size() != plant.n() || q.size() != plant.r()) {
        throw DimensionError("simulate: x0 or q dimension mismatch");
    }
    numerics::require_finite(x0, "x0");
    numerics::require_finite(u0, "u0");
    numerics::require_finite(q, "q");

    ClosedLoopTrajectory traj;
    if (u0.cwiseAbs().maxCoeff() != 0.0) {
        traj.warnings.emplace_back(
            "initial controller state is nonzero; the gradient and consensus bounds assume u0 = 0");
    }
    if (options.record_stride > 0) {
        traj.records.reserve(steps / options.record_stride + 1);
    }

    const Vector eq = plant.E() * q;
    Vector x = x0;
    Vector x_next(plant.n());
    Vector u = u0;
    Vector u_next(u0.size());
    Vector applied(plant.m());
    Vector y(plant.p());
    Vector gamma(u0.size());
    Vector average(law.average_size());
    const double nan = std::numeric_limits<double>::quiet_NaN();

    for (std::size_t k = 0; k < steps; ++k) {
        law.applied(u, applied);
        y.noalias() = plant.C() * x;
        y.noalias() += plant.D() * applied;
        law.gradient(u, y, gamma);
        double consensus = 0.0;
        law.consensus(u, average, consensus);

        const double storage = options.storage ? options.storage(x, u) : nan;
        const double err = options.u_star ? law.error(u, *options.u_star) : nan;
        const StepView view{k, x, u, y, applied, gamma, average, gamma.norm(), consensus, storage, err};
        for (const auto& obs : options.observers) {
            obs(view);
        }
        if (options.record_stride > 0 && k % options.record_stride == 0) {
            traj.records.push_back(make_record(view));
        }

        law.advance(u, gamma, u_next);
        x_next.noalias() = plant.A() * x;
        x_next.noalias() += plant.B() * applied;
        x_next += eq;

        const double xn = x_next.norm();
        const double un = u_next.norm();
        if (!(xn <= options.divergence_threshold) || !(un <= options.divergence_threshold)) {
            std::ostringstream os;
            os << "closed loop diverged at step " << k + 1 << " (|x| = " << xn << ", |u| = " << un
               << "); the stepsize is likely too large";
            throw DivergenceError(os.str(), k + 1);
        }
        traj.last_increment = (u_next - u).norm();
        x.swap(x_next);
        u.swap(u_next);
        traj.steps_run = k + 1;
        if (options.stop_tolerance > 0.0 && traj.last_increment < options.stop_tolerance) {
            traj.stopped_early = traj.steps_run < steps;
            break;
        }
    }
    traj.final_x = std::move(x);
    traj.final_u_stack = std::move(u);
    return traj;
}

struct DistributedLaw {
    const MixingMatrix& w;
    const Selector& s;
    const CostModel& costs;
    const ProjectedGradientContext& ctx;
    double eta;
    GradientWorkspace work;

    [[nodiscard]] Eigen::Index average_size() const { return costs.input_dim(); }
    void applied(const Vector& u, Vector& out) const { s.apply_into(u, out); }
    void gradient(const Vector& u, const Vector& y, Vector& gamma) { gradient_stack_into(ctx, costs, u, y, gamma, work); }
    void advance(const Vector& u, const Vector& gamma, Vector& u_next) const {
        kron_apply_into(w.W(), u, costs.input_dim(), u_next);
        u_next -= eta * gamma;
    }
    void consensus(const Vector& u, Vector& average, double& error) const {
        average_and_consensus_into(u, costs.input_dim(), average, error);
    }
    [[nodiscard]] double error(const Vector& u, const Vector& u_star) const { return error_to_optimizer(u, u_star); }
};

struct CentralizedLaw {
    const CostModel& costs;
    const ProjectedGradientContext& ctx;
    double eta;
    GradientWorkspace work;
    Vector tmp;

    [[nodiscard]] Eigen::Index average_size() const { return costs.input_dim(); }
    static void applied(const Vector& u, Vector& out) { out = u; }
    void gradient(const Vector& u, const Vector& y, Vector& gamma) {
        centralized_gradient_into(ctx, costs, u, y, gamma, tmp, work);
    }
    void advance(const Vector& u, const Vector& gamma, Vector& u_next) const {
        u_next = u;
        u_next -= eta * gamma;
    }
    static void consensus(const Vector& u, Vector& average, double& error) {
        average = u;
        error = 0.0;
    }
    [[nodiscard]] static double error(const Vector& u, const Vector& u_star) { return (u - u_star).norm(); }
};

}  // namespace

Selector::Selector(Partition input_dims) : dims_(std::move(input_dims)) {
    if (dims_.agents() == 0) {
        throw DimensionError("selector needs at least one agent");
    }
}

Matrix Selector::matrix() const {
    const Eigen::Index m = dims_.total();
    Matrix s = Matrix::Zero(m, stack_size());
    for (std::size_t i = 0; i < dims_.agents(); ++i) {
        const Eigen::Index off = dims_.offset(i);
        for (Eigen::Index j = 0; j < dims_.size(i); ++j) {
            s(off + j, static_cast<Eigen::Index>(i) * m + off + j) = 1.0;
        }
    }
    return s;
}

void Selector::apply_into(const Vector& u_stack, Vector& out) const {
    if (u_stack.size() != stack_size()) {
        throw DimensionError("selector: stack length must equal m * N");
    }
    const Eigen::Index m = dims_.total();
    out.resize(m);
    for (std::size_t i = 0; i < dims_.agents(); ++i) {
        const Eigen::Index off = dims_.offset(i);
        out.segment(off, dims_.size(i)) = u_stack.segment(static_cast<Eigen::Index>(i) * m + off, dims_.size(i));
    }
}

Vector Selector::apply(const Vector& u_stack) const {
    Vector out;
    apply_into(u_stack, out);
    return out;
}

ControllerState fdgd_step(const ControllerState& state, const MixingMatrix& w, const ProjectedGradientContext& ctx,
                          const CostModel& costs, const Vector& y, double eta) {
    require_eta(eta);
    require_stack(state.u_stack, costs, "fdgd_step");
    if (w.nodes() != costs.agents()) {
        throw DimensionError("fdgd_step: mixing matrix and cost model disagree on N");
    }
    const Vector gamma = gradient_stack(ctx, costs, state.u_stack, y);
    ControllerState next;
    kron_apply_into(w.W(), state.u_stack, costs.input_dim(), next.u_stack);
    next.u_stack -= eta * gamma;
    next.k = state.k + 1;
    return next;
}

Vector centralized_step(const Vector& u, const ProjectedGradientContext& ctx, const CostModel& costs, const Vector& y,
                        double eta) {
    require_eta(eta);
    if (u.size() != costs.input_dim() || y.size() != costs.output_dim() || ctx.G.cols() != u.size()) {
        throw DimensionError("centralized_step: dimension mismatch");
    }
    Vector gamma(u.size());
    Vector tmp(u.size());
    GradientWorkspace work(y.size());
    centralized_gradient_into(ctx, costs, u, y, gamma, tmp, work);
    Vector next = u;
    next -= eta * gamma;
    return next;
}

Vector apply_input(const ControllerState& state, const Selector& s) { return s.apply(state.u_stack); }

void average_and_consensus_into(const Vector& u_stack, Eigen::Index m, Vector& average, double& error) {
    if (m <= 0 || u_stack.size() % m != 0 || u_stack.size() == 0) {
        throw DimensionError("average_and_consensus: stack length must be a positive multiple of m");
    }
    const Eigen::Index n = u_stack.size() / m;
    Eigen::Map<const Matrix> u(u_stack.data(), m, n);
    average = u.rowwise().sum() / static_cast<double>(n);
    error = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        error = std::max(error, (u.col(i) - average).norm());
    }
}

ConsensusSummary average_and_consensus(const Vector& u_stack, Eigen::Index m) {
    ConsensusSummary out;
    average_and_consensus_into(u_stack, m, out.average, out.error);
    return out;
}

double error_to_optimizer(const Vector& u_stack, const Vector& u_star) {
    const Eigen::Index m = u_star.size();
    if (m == 0 || u_stack.size() % m != 0 || u_stack.size() == 0) {
        throw DimensionError("error_to_optimizer: stack length must be a positive multiple of m");
    }
    const Eigen::Index n = u_stack.size() / m;
    Eigen::Map<const Matrix> u(u_stack.data(), m, n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        total += (u.col(i) - u_star).norm();
    }
    return total / static_cast<double>(n);
}

StepRecord make_record(const StepView& view) {
    StepRecord r;
    r.k = view.k;
    r.x = view.x;
    r.u_stack = view.u_stack;
    r.y = view.y;
    r.applied = view.applied;
    r.gamma = view.gamma;
    r.average = view.average;
    r.gamma_norm = view.gamma_norm;
    r.consensus_error = view.consensus_error;
    r.storage = view.storage;
    r.err_to_opt = view.err_to_opt;
    return r;
}

ClosedLoopTrajectory simulate(const NetworkedPlant& plant, const MixingMatrix& w, const Selector& s,
                              const CostModel& costs, const ProjectedGradientContext& ctx, double eta, const Vector& q,
                              const Vector& x0, const Vector& u0_stack, std::size_t steps,
                              const SimulationOptions& options) {
    require_eta(eta);
    plant.require_stable();
    require_stack(u0_stack, costs, "simulate");
    if (w.nodes() != costs.agents() || s.agents() != costs.agents() || plant.agents() != costs.agents()) {
        throw DimensionError("simulate: plant, graph, selector and costs disagree on N");
    }
    if (s.m() != plant.m() || costs.input_dim() != plant.m() || costs.output_dim() != plant.p()) {
        throw DimensionError("simulate: cost dimensions do not match the plant");
    }
    DistributedLaw law{w, s, costs, ctx, eta, GradientWorkspace(plant.p())};
    return run_loop(plant, law, q, x0, u0_stack, steps, options);
}

ClosedLoopTrajectory simulate_centralized(const NetworkedPlant& plant, const CostModel& costs,
                                          const ProjectedGradientContext& ctx, double eta, const Vector& q,
                                          const Vector& x0, const Vector& u0, std::size_t steps,
                                          const SimulationOptions& options) {
    require_eta(eta);
    plant.require_stable();
    if (u0.size() != plant.m() || costs.input_dim() != plant.m() || costs.output_dim() != plant.p()) {
        throw DimensionError("simulate_centralized: dimension mismatch");
    }
    CentralizedLaw law{costs, ctx, eta, GradientWorkspace(plant.p()), Vector(plant.m())};
    return run_loop(plant, law, q, x0, u0, steps, options);
}

}  // namespace fdgd
