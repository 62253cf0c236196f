#pragma once

#include "fdgd/controller.hpp"
#include "fdgd/cost.hpp"
#include "fdgd/network.hpp"
#include "fdgd/plant.hpp"

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fdgd {

enum class BoundMode { restricted, strongly_convex, convergence_only };

[[nodiscard]] std::string to_string(BoundMode mode);
[[nodiscard]] BoundMode parse_bound_mode(const std::string& text);

inline constexpr double kStorageTolerance = 1e-12;
// Relative slack on the sigma and consensus comparisons, covering the
// rounding of the evaluated norms only.
inline constexpr double kBoundRelativeSlack = 1e-12;

struct CertificateReport {
    std::size_t N = 0;
    // Stepsize certificate.
    double L_h = 0.0;
    double L_Phi = 0.0;
    double norm_Pi = 0.0;
    Matrix P;
    Matrix Q_lyap;
    double lambda1_P = 0.0;
    double lambdan_Q = 0.0;
    double norm_ATP = 0.0;
    double lambda_N = 0.0;
    double beta = 0.0;
    double mu = 0.0;
    int mu_halvings = 0;
    double eta_1 = 0.0;
    double eta_2 = 0.0;
    double eta_3 = 0.0;
    double eta_bar = 0.0;
    double d = 0.5;
    // Error-bound quantities, evaluated at `eta`.
    double eta = 0.0;
    double sigma = std::numeric_limits<double>::quiet_NaN();
    double nu_Phi = 0.0;
    double nu = 0.0;  // nu_Phi / N
    double theta = 0.5;
    BoundMode mode = BoundMode::convergence_only;
    double c1 = std::numeric_limits<double>::quiet_NaN();
    double c2 = std::numeric_limits<double>::quiet_NaN();
    double c3 = std::numeric_limits<double>::quiet_NaN();
    double c4 = std::numeric_limits<double>::quiet_NaN();
    double one_minus_c3_sq = std::numeric_limits<double>::quiet_NaN();
    double delta = std::numeric_limits<double>::quiet_NaN();
    double error_floor = std::numeric_limits<double>::quiet_NaN();
    double eta_floor_bound = std::numeric_limits<double>::quiet_NaN();
    double consensus_bound = std::numeric_limits<double>::quiet_NaN();  // eta sigma / (1 - beta)
    std::vector<std::string> notes;

    [[nodiscard]] bool has_sigma() const noexcept { return sigma == sigma; }
    [[nodiscard]] bool has_error_bound() const noexcept { return mode != BoundMode::convergence_only && c3 == c3; }
    // c3^k e0 + floor.
    [[nodiscard]] double envelope(std::size_t k, double e0) const;
};

// Certified stepsize bound. Q_lyap defaults to I. mu starts at
// (1 + lambda_N) / 4 and is halved until 0 < mu <= 1 - ((1 - lambda_N) + eta_bar L_Phi) / 2.
[[nodiscard]] CertificateReport stepsize_bound(const NetworkedPlant& plant, const SteadyStateMaps& maps,
                                               const MixingMatrix& w, const CostModel& costs,
                                               const std::optional<Matrix>& Q_lyap = std::nullopt);

// sigma = sqrt(2 L_Phi (sum_i Phi_i(u0, y0) - Phi^opt)); requires u0 = 0.
[[nodiscard]] double sigma(const CostModel& costs, const Vector& u0_stack, const Vector& y0, double L_Phi);

struct RateConstants {
    double c1 = 0.0;
    double c2 = 0.0;
};

// nullopt in convergence-only mode or when nu_Phi <= 0.
[[nodiscard]] std::optional<RateConstants> rate_constants(double nu_Phi, std::size_t N, double L_Phi, BoundMode mode,
                                                          double theta = 0.5);

struct ErrorConstants {
    double c3 = 0.0;
    double c4 = 0.0;
    double one_minus_c3_sq = 0.0;
    double delta = 0.0;
    double floor = 0.0;
};

// Default delta = c2 / (2 (1 - eta c2)), which gives c3 = sqrt(1 - eta c2 / 2).
[[nodiscard]] ErrorConstants error_constants(double eta, double c1, double c2, double L_Phi, double sigma,
                                             double beta, std::optional<double> delta = std::nullopt);

// 2 eta L_Phi sigma / (c2 (1 - beta)).
[[nodiscard]] double eta_floor_bound(double eta, double c2, double L_Phi, double sigma, double beta);

struct CertifyOptions {
    std::optional<Matrix> Q_lyap;
    std::optional<BoundMode> mode;
    double theta = 0.5;
    std::optional<double> eta;    // defaults to eta_bar
    std::optional<double> delta;  // defaults to the geometric choice above
    std::optional<Vector> x0;     // defaults to 0
    std::optional<Vector> u0_stack;
};

// Full report: stepsize bound, sigma at (u0, y0 = C x0 + D S u0), rate and
// error constants at the chosen eta when the mode admits them.
[[nodiscard]] CertificateReport certify(const NetworkedPlant& plant, const SteadyStateMaps& maps,
                                        const MixingMatrix& w, const CostModel& costs,
                                        const CertifyOptions& options = {});

struct OptimizerResult {
    Vector u_star;
    Vector x_star;
    Vector y_star;
    double stationarity_residual = 0.0;
    bool unique = false;
};

// Steady-state optimizer. Closed form for quadratic costs; otherwise the
// centralized iteration with exact steady-state feedback.
[[nodiscard]] OptimizerResult optimizer(const SteadyStateMaps& maps, const CostModel& costs, const Vector& q);

// Error series e^k for recorded steps; needs a unique optimizer.
[[nodiscard]] std::vector<double> error_to_optimizer(const ClosedLoopTrajectory& traj, const OptimizerResult& opt);

// U = (d / eta) V_u + (1 - d) x~^T P x~.
class StorageEvaluator {
public:
    struct Parts {
        double V_u = 0.0;
        double V_x = 0.0;
        double U = 0.0;
    };

    StorageEvaluator(const NetworkedPlant& plant, const SteadyStateMaps& maps, const MixingMatrix& w,
                     const CostModel& costs, const Matrix& P, double eta, const Vector& q, double d = 0.5);

    // Not reentrant (owns scratch buffers); use one evaluator per thread.
    [[nodiscard]] Parts evaluate(const Vector& x, const Vector& u_stack) const;
    [[nodiscard]] double operator()(const Vector& x, const Vector& u_stack) const { return evaluate(x, u_stack).U; }

    // 1/2 sum ||u_(i)||^2 - 1/2 sum w_ij u_(i)^T u_(j), evaluated as
    // 1/4 sum w_ij ||u_(i) - u_(j)||^2.
    [[nodiscard]] double consensus_part(const Vector& u_stack) const;

private:
    const CostModel& costs_;
    Matrix G_;
    Vector Hq_;
    Matrix state_input_gain_S_;
    Vector state_disturbance_shift_;
    Matrix P_;
    std::vector<std::vector<std::pair<Eigen::Index, double>>> upper_neighbors_;
    double eta_;
    double d_;
    Eigen::Index m_;
    Selector selector_;
    mutable Vector xt_;
    mutable Vector y_;
    mutable Vector applied_;
};

struct StorageDiagnostics {
    std::vector<std::size_t> k;
    std::vector<double> V_u;
    std::vector<double> V_x;
    std::vector<double> U;
    std::vector<std::size_t> violations;  // k where U^{k+1} > U^k + 1e-12
};

[[nodiscard]] StorageDiagnostics storage_diagnostics(const ClosedLoopTrajectory& traj,
                                                     const StorageEvaluator& storage);

// Weight d maximizing the eta_1 / eta_2 pieces of the stepsize bound;
// the certificate itself always uses d = 0.5.
[[nodiscard]] double optimal_storage_weight(const CertificateReport& report);
// min(eta1_bar(d), eta2_bar(d)) for a given storage weight.
[[nodiscard]] double storage_weight_bound(const CertificateReport& report, double d);

// Streaming check of every per-step certificate. Feed it one StepView per
// step (k consecutive); errors are the mean distance to the optimizer.
class CertificateMonitor {
public:
    struct Counts {
        std::size_t steps = 0;
        std::size_t storage = 0;
        std::size_t gradient = 0;
        std::size_t consensus = 0;
        std::size_t envelope = 0;
        std::size_t first_violation_step = std::numeric_limits<std::size_t>::max();
        double max_gradient_ratio = 0.0;   // max ||gamma|| / sigma
        double max_consensus_ratio = 0.0;  // max consensus / bound
        double max_envelope_ratio = 0.0;   // max e^k / envelope(k)
        double max_storage_increase = -std::numeric_limits<double>::infinity();
        [[nodiscard]] std::size_t total() const noexcept { return storage + gradient + consensus + envelope; }
    };

    explicit CertificateMonitor(const CertificateReport& report, bool check_sigma = true);

    void observe(std::size_t k, double gamma_norm, double consensus_error, double storage, double err);
    void observe(const StepView& view) {
        observe(view.k, view.gamma_norm, view.consensus_error, view.storage, view.err_to_opt);
    }
    [[nodiscard]] const Counts& counts() const noexcept { return counts_; }

private:
    const CertificateReport& report_;
    bool check_sigma_;
    Counts counts_;
    double last_storage_ = std::numeric_limits<double>::quiet_NaN();
    double e0_ = std::numeric_limits<double>::quiet_NaN();
    std::size_t origin_ = 0;
};

}  // namespace fdgd
