#pragma once

#include "fdgd/cost.hpp"
#include "fdgd/network.hpp"
#include "fdgd/plant.hpp"

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace fdgd {

// Local copies u_(1) ... u_(N), each in R^m, stacked agent-major.
struct ControllerState {
    Vector u_stack;
    std::size_t k = 0;
};

// S = diag([I_m1 0 ...], [0 I_m2 0 ...], ...): agent i's own block of its own
// copy actuates subsystem i.
class Selector {
public:
    explicit Selector(Partition input_dims);

    [[nodiscard]] std::size_t agents() const noexcept { return dims_.agents(); }
    [[nodiscard]] Eigen::Index m() const noexcept { return dims_.total(); }
    [[nodiscard]] Eigen::Index stack_size() const noexcept { return dims_.total() * static_cast<Eigen::Index>(dims_.agents()); }
    [[nodiscard]] const Partition& input_dims() const noexcept { return dims_; }

    [[nodiscard]] Matrix matrix() const;
    [[nodiscard]] Vector apply(const Vector& u_stack) const;
    void apply_into(const Vector& u_stack, Vector& out) const;

private:
    Partition dims_;
};

// u+ = (W kron I) u - eta * gamma(u, y). eta = 0 is pure consensus.
[[nodiscard]] ControllerState fdgd_step(const ControllerState& state, const MixingMatrix& w,
                                        const ProjectedGradientContext& ctx, const CostModel& costs,
                                        const Vector& y, double eta);

// u+ = u - eta * sum_i Pi^T grad Phi_i(u, y).
[[nodiscard]] Vector centralized_step(const Vector& u, const ProjectedGradientContext& ctx, const CostModel& costs,
                                      const Vector& y, double eta);

[[nodiscard]] Vector apply_input(const ControllerState& state, const Selector& s);

struct ConsensusSummary {
    Vector average;
    double error = 0.0;  // max_i ||u_(i) - u_bar||
};

[[nodiscard]] ConsensusSummary average_and_consensus(const Vector& u_stack, Eigen::Index m);
void average_and_consensus_into(const Vector& u_stack, Eigen::Index m, Vector& average, double& error);

// (1/N) sum_i ||u_(i) - u_star||.
[[nodiscard]] double error_to_optimizer(const Vector& u_stack, const Vector& u_star);

// Everything known at step k before the controller and plant advance.
struct StepView {
    std::size_t k;
    const Vector& x;
    const Vector& u_stack;
    const Vector& y;
    const Vector& applied;  // S u^k
    const Vector& gamma;
    const Vector& average;
    double gamma_norm;
    double consensus_error;
    double storage;       // NaN without a storage function
    double err_to_opt;    // NaN without u_star
};

struct StepRecord {
    std::size_t k = 0;
    Vector x;
    Vector u_stack;
    Vector y;
    Vector applied;
    Vector gamma;
    Vector average;
    double gamma_norm = 0.0;
    double consensus_error = 0.0;
    double storage = std::numeric_limits<double>::quiet_NaN();
    double err_to_opt = std::numeric_limits<double>::quiet_NaN();
};

[[nodiscard]] StepRecord make_record(const StepView& view);

using StepObserver = std::function<void(const StepView&)>;
using StorageFunction = std::function<double(const Vector& x, const Vector& u_stack)>;

struct SimulationOptions {
    // Keep a full record every `record_stride` steps (0 keeps none).
    std::size_t record_stride = 1;
    // Stop after the step where ||u^{k+1} - u^k|| < stop_tolerance (0 disables).
    double stop_tolerance = 0.0;
    double divergence_threshold = 1e12;
    StorageFunction storage;
    std::optional<Vector> u_star;
    std::vector<StepObserver> observers;
};

struct ClosedLoopTrajectory {
    std::vector<StepRecord> records;
    std::size_t steps_run = 0;
    bool stopped_early = false;
    double last_increment = std::numeric_limits<double>::quiet_NaN();  // ||u^K - u^{K-1}||
    Vector final_x;
    Vector final_u_stack;
    std::vector<std::string> warnings;
};

// Closed loop: y^k = C x^k + D S u^k; u^{k+1} = fdgd_step(u^k, y^k);
// x^{k+1} = A x^k + B S u^k + E q. Records k = 0 .. steps-1; the state after
// the last step is in final_x / final_u_stack. Any non-finite value or state
// norm above the divergence threshold raises DivergenceError.
[[nodiscard]] ClosedLoopTrajectory simulate(const NetworkedPlant& plant, const MixingMatrix& w, const Selector& s,
                                            const CostModel& costs, const ProjectedGradientContext& ctx, double eta,
                                            const Vector& q, const Vector& x0, const Vector& u0_stack,
                                            std::size_t steps, const SimulationOptions& options = {});

// Single controller fed by the plant, u^{k+1} = centralized_step(u^k, y^k).
// Requires a plant whose input is the full u (it is applied directly).
[[nodiscard]] ClosedLoopTrajectory simulate_centralized(const NetworkedPlant& plant, const CostModel& costs,
                                                        const ProjectedGradientContext& ctx, double eta,
                                                        const Vector& q, const Vector& x0, const Vector& u0,
                                                        std::size_t steps, const SimulationOptions& options = {});

}  // namespace fdgd
