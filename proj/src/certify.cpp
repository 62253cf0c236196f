#include "fdgd/certify.hpp"

#include "fdgd/errors.hpp"

#include <cmath>
#include <sstream>

namespace fdgd {

namespace {

double theorem1_mu_ceiling(double lambda_n, double eta, double l_phi) {
    return 1.0 - ((1.0 - lambda_n) + eta * l_phi) / 2.0;
}

}  // namespace

std::string to_string(BoundMode mode) {
    switch (mode) {
        case BoundMode::restricted:
            return "restricted";
        case BoundMode::strongly_convex:
            return "strongly-convex";
        case BoundMode::convergence_only:
            return "convergence-only";
    }
    return "convergence-only";
}

BoundMode parse_bound_mode(const std::string& text) {
    if (text == "restricted") {
        return BoundMode::restricted;
    }
    if (text == "strongly-convex" || text == "strongly_convex") {
        return BoundMode::strongly_convex;
    }
    if (text == "convergence-only" || text == "convergence_only") {
        return BoundMode::convergence_only;
    }
    throw ParameterError("unknown bound mode '" + text + "'");
}

double CertificateReport::envelope(std::size_t k, double e0) const {
    if (!has_error_bound()) {
        throw PreconditionError("no error bound in convergence-only mode");
    }
    // c3^k = exp(k/2 * log(c3^2)), with log(c3^2) = log1p(-(1 - c3^2)).
    const double decay = std::exp(0.5 * static_cast<double>(k) * std::log1p(-one_minus_c3_sq));
    return decay * e0 + error_floor;
}

CertificateReport stepsize_bound(const NetworkedPlant& plant, const SteadyStateMaps& maps, const MixingMatrix& w,
                                 const CostModel& costs, const std::optional<Matrix>& Q_lyap) {
    plant.require_stable();
    if (w.nodes() != costs.agents() || plant.agents() != costs.agents()) {
        throw DimensionError("stepsize_bound: plant, mixing matrix and costs disagree on N");
    }
    CertificateReport rep;
    rep.N = costs.agents();
    const Eigen::Index n = plant.n();
    rep.Q_lyap = Q_lyap ? *Q_lyap : Matrix::Identity(n, n);
    if (rep.Q_lyap.rows() != n || rep.Q_lyap.cols() != n) {
        throw DimensionError("Q_lyap must be n x n");
    }
    rep.P = numerics::solve_discrete_lyapunov(plant.A(), rep.Q_lyap);
    rep.lambda1_P = numerics::sym_eigenvalues(rep.P)(0);
    const Vector q_eig = numerics::sym_eigenvalues(rep.Q_lyap);
    rep.lambdan_Q = q_eig(q_eig.size() - 1);
    rep.norm_ATP = numerics::spectral_norm(plant.A().transpose() * rep.P);

    const Matrix s = Selector(plant.input_dims()).matrix();
    rep.L_h = numerics::spectral_norm(maps.state_input_gain * s);
    const ProjectedGradientContext ctx = make_gradient_context(maps.G, costs);
    rep.L_Phi = ctx.L_Phi;
    rep.norm_Pi = ctx.norm_Pi;
    rep.lambda_N = w.lambda_min();
    rep.beta = w.beta();

    if (rep.lambda_N <= -1.0 + kMinEigenMargin) {
        throw InfeasibleError("lambda_N(W) is too close to -1; no feasible mu exists");
    }

    const double l_phi = rep.L_Phi;
    const double l_h = rep.L_h;
    const double rho = rep.norm_ATP * rep.norm_ATP + rep.lambdan_Q * rep.lambda1_P;
    double mu = (1.0 + rep.lambda_N) / 4.0;
    for (int halvings = 0; halvings < 200; ++halvings) {
        rep.mu = mu;
        rep.mu_halvings = halvings;
        rep.eta_1 = (1.0 - 2.0 * mu + rep.lambda_N) / l_phi;
        // L_h = 0 (no input reaches the state) leaves only eta_1.
        rep.eta_2 = l_h > 0.0 ? mu / (rep.lambda1_P * l_h * l_h) : std::numeric_limits<double>::infinity();
        rep.eta_3 = mu * rep.lambdan_Q /
                    (l_phi * l_phi / 4.0 + l_h * l_h * rho + l_h * l_phi * rep.norm_ATP);
        rep.eta_bar = std::min({rep.eta_1, rep.eta_2, rep.eta_3});
        if (rep.eta_bar > 0.0 && mu > 0.0 && mu <= theorem1_mu_ceiling(rep.lambda_N, rep.eta_bar, l_phi)) {
            return rep;
        }
        mu /= 2.0;
    }
    throw InfeasibleError("no mu satisfies the stepsize-certificate range at eta_bar");
}

double sigma(const CostModel& costs, const Vector& u0_stack, const Vector& y0, double L_Phi) {
    const Eigen::Index m = costs.input_dim();
    if (u0_stack.size() != m * static_cast<Eigen::Index>(costs.agents()) || y0.size() != costs.output_dim()) {
        throw DimensionError("sigma: u0 or y0 dimension mismatch");
    }
    if (u0_stack.size() > 0 && u0_stack.cwiseAbs().maxCoeff() != 0.0) {
        throw PreconditionError(
            "sigma requires a zero initial controller state; use convergence-only diagnostics for u0 != 0");
    }
    const double gap = costs.total_value(u0_stack, y0) - optimal_value(costs);
    return std::sqrt(2.0 * L_Phi * std::max(gap, 0.0));
}

std::optional<RateConstants> rate_constants(double nu_Phi, std::size_t N, double L_Phi, BoundMode mode,
                                            double theta) {
    if (N == 0 || !(L_Phi > 0.0)) {
        throw ParameterError("rate_constants needs N >= 1 and L_Phi > 0");
    }
    if (mode == BoundMode::convergence_only || !(nu_Phi > 0.0)) {
        return std::nullopt;
    }
    const double nu_f = nu_Phi / static_cast<double>(N);
    const double l_f = L_Phi;
    if (nu_f > l_f) {
        throw ParameterError("convexity modulus per agent exceeds the Lipschitz constant");
    }
    RateConstants rc;
    if (mode == BoundMode::restricted) {
        if (!(theta >= 0.0 && theta <= 1.0)) {
            throw ParameterError("theta must lie in [0, 1]");
        }
        rc.c1 = theta / l_f;
        rc.c2 = (1.0 - theta) * nu_f;
    } else {
        rc.c1 = 1.0 / (nu_f + l_f);
        rc.c2 = nu_f * l_f / (nu_f + l_f);
    }
    return rc;
}

ErrorConstants error_constants(double eta, double c1, double c2, double L_Phi, double sigma, double beta,
                               std::optional<double> delta) {
    if (!(eta > 0.0)) {
        throw ParameterError("error constants need eta > 0");
    }
    if (eta > c1) {
        std::ostringstream os;
        os << "eta = " << eta << " exceeds c1 = " << c1 << "; the error bound does not apply";
        throw PreconditionError(os.str());
    }
    if (!(eta * c2 < 1.0) || !(c2 > 0.0)) {
        throw PreconditionError("error constants need c2 > 0 and eta * c2 < 1");
    }
    if (!(beta >= 0.0 && beta < 1.0) || !(sigma >= 0.0)) {
        throw ParameterError("error constants need beta in [0, 1) and sigma >= 0");
    }
    ErrorConstants ec;
    if (delta) {
        if (!(*delta > 0.0)) {
            throw ParameterError("delta must be positive");
        }
        ec.delta = *delta;
        // 1 - c3^2 = eta (c2 - delta (1 - eta c2)).
        ec.one_minus_c3_sq = eta * (c2 - ec.delta * (1.0 - eta * c2));
    } else {
        ec.delta = c2 / (2.0 * (1.0 - eta * c2));
        ec.one_minus_c3_sq = eta * c2 / 2.0;
    }
    if (!(ec.one_minus_c3_sq > 0.0)) {
        std::ostringstream os;
        os << "c3 >= 1 (delta = " << ec.delta << ", eta = " << eta << ", c2 = " << c2
           << "); pick delta < c2 / (1 - eta c2)";
        throw ConfigurationError(os.str());
    }
    ec.c3 = std::sqrt(1.0 - ec.one_minus_c3_sq);
    const double one_minus_beta = 1.0 - beta;
    ec.c4 = std::sqrt(eta * eta * eta * (eta + 1.0 / ec.delta)) * L_Phi * sigma / one_minus_beta;
    ec.floor = ec.c4 / std::sqrt(ec.one_minus_c3_sq) + eta * sigma / one_minus_beta;
    return ec;
}

double eta_floor_bound(double eta, double c2, double L_Phi, double sigma, double beta) {
    if (!(c2 > 0.0) || !(beta < 1.0)) {
        throw ParameterError("eta_floor_bound needs c2 > 0 and beta < 1");
    }
    return 2.0 * eta * L_Phi * sigma / (c2 * (1.0 - beta));
}

CertificateReport certify(const NetworkedPlant& plant, const SteadyStateMaps& maps, const MixingMatrix& w,
                          const CostModel& costs, const CertifyOptions& options) {
    CertificateReport rep = stepsize_bound(plant, maps, w, costs, options.Q_lyap);
    rep.eta = options.eta ? *options.eta : rep.eta_bar;
    if (!(rep.eta > 0.0)) {
        throw ParameterError("certify: eta must be positive");
    }
    if (rep.eta > rep.eta_bar) {
        rep.notes.emplace_back("eta exceeds eta_bar; the convergence certificate does not cover this stepsize");
    }
    rep.theta = options.theta;

    const Eigen::Index mn = plant.m() * static_cast<Eigen::Index>(costs.agents());
    const Vector u0 = options.u0_stack ? *options.u0_stack : Vector::Zero(mn);
    const Vector x0 = options.x0 ? *options.x0 : Vector::Zero(plant.n());
    if (u0.size() != mn || x0.size() != plant.n()) {
        throw DimensionError("certify: x0 or u0 dimension mismatch");
    }
    const Vector y0 = plant.C() * x0 + plant.D() * Selector(plant.input_dims()).apply(u0);
    if (u0.cwiseAbs().maxCoeff() == 0.0) {
        rep.sigma = sigma(costs, u0, y0, rep.L_Phi);
        rep.consensus_bound = rep.eta * rep.sigma / (1.0 - rep.beta);
    } else {
        rep.notes.emplace_back("u0 != 0: sigma and the consensus/error bounds are not available");
    }

    rep.nu_Phi = convexity_modulus(costs);
    rep.nu = rep.nu_Phi / static_cast<double>(rep.N);
    if (options.mode) {
        rep.mode = *options.mode;
    } else if (rep.nu_Phi <= 0.0) {
        rep.mode = BoundMode::convergence_only;
    } else {
        rep.mode = costs.strongly_convex() ? BoundMode::strongly_convex : BoundMode::restricted;
    }
    if (rep.mode != BoundMode::convergence_only && rep.nu_Phi <= 0.0) {
        rep.notes.emplace_back("convexity modulus is zero; falling back to convergence-only mode");
        rep.mode = BoundMode::convergence_only;
    }

    const auto rc = rate_constants(rep.nu_Phi, rep.N, rep.L_Phi, rep.mode, rep.theta);
    if (!rc) {
        return rep;
    }
    rep.c1 = rc->c1;
    rep.c2 = rc->c2;
    if (!rep.has_sigma()) {
        return rep;
    }
    if (rep.eta > rep.c1) {
        rep.notes.emplace_back("eta exceeds c1; the error envelope does not apply");
        return rep;
    }
    if (!(rep.c2 > 0.0)) {
        rep.notes.emplace_back("c2 = 0 (theta = 1); no geometric rate is certified");
        return rep;
    }
    const ErrorConstants ec = error_constants(rep.eta, rep.c1, rep.c2, rep.L_Phi, rep.sigma, rep.beta, options.delta);
    rep.c3 = ec.c3;
    rep.c4 = ec.c4;
    rep.one_minus_c3_sq = ec.one_minus_c3_sq;
    rep.delta = ec.delta;
    rep.error_floor = ec.floor;
    rep.eta_floor_bound = eta_floor_bound(rep.eta, rep.c2, rep.L_Phi, rep.sigma, rep.beta);
    return rep;
}

OptimizerResult optimizer(const SteadyStateMaps& maps, const CostModel& costs, const Vector& q) {
    const Matrix& g = maps.G;
    const Eigen::Index m = g.cols();
    if (q.size() != maps.H.cols() || costs.input_dim() != m || costs.output_dim() != g.rows()) {
        throw DimensionError("optimizer: dimension mismatch");
    }
    const Vector hq = maps.H * q;
    const double n_agents = static_cast<double>(costs.agents());
    const ProjectedGradientContext ctx = make_gradient_context(g, costs);
    auto reduced_gradient = [&](const Vector& u) {
        const Vector y = g * u + hq;
        Vector total = Vector::Zero(m);
        for (std::size_t i = 0; i < costs.agents(); ++i) {
            total += projected_gradient(ctx, costs.agent(i), u, y);
        }
        return total;
    };

    OptimizerResult res;
    if (const auto& quad = costs.quadratic()) {
        const Matrix normal = quad->alpha.sum() * Matrix::Identity(m, m) + n_agents * g.transpose() * g;
        const Vector rhs = n_agents * g.transpose() * (quad->y_ref - hq);
        try {
            res.u_star = numerics::solve_linear(normal, rhs);
        } catch (const SingularityError& e) {
            throw SingularityError(std::string("degenerate cost: normal matrix is singular; ") + e.what(),
                                   e.condition_estimate());
        }
        res.stationarity_residual = reduced_gradient(res.u_star).norm();
        if (res.stationarity_residual > 1e-10 * (1.0 + rhs.norm())) {
            std::ostringstream os;
            os << "optimizer stationarity residual " << res.stationarity_residual << " exceeds 1e-10";
            throw SingularityError(os.str(), 0.0);
        }
        res.unique = true;
    } else {
        double lip = 0.0;
        for (std::size_t i = 0; i < costs.agents(); ++i) {
            lip += costs.agent(i).lipschitz_constant();
        }
        // Lipschitz constant of u -> sum_i Pi^T grad Phi_i(u, Gu + Hq).
        const double step = 1.0 / (ctx.norm_Pi * ctx.norm_Pi * lip);
        Vector u = Vector::Zero(m);
        bool converged = false;
        for (long iter = 0; iter < 5'000'000; ++iter) {
            const Vector grad = reduced_gradient(u);
            if (grad.norm() < 1e-9) {
                converged = true;
                break;
            }
            u -= step * grad;
        }
        if (!converged) {
            throw ConfigurationError("optimizer: centralized iteration did not reach gradient norm 1e-9");
        }
        res.u_star = u;
        res.stationarity_residual = reduced_gradient(u).norm();
        res.unique = costs.strongly_convex();
    }
    res.x_star = maps.state_input_gain * res.u_star + maps.state_disturbance_gain * q;
    res.y_star = g * res.u_star + hq;
    return res;
}

std::vector<double> error_to_optimizer(const ClosedLoopTrajectory& traj, const OptimizerResult& opt) {
    if (!opt.unique) {
        throw UnsupportedError("the optimizer set may not be a singleton; supply a projection");
    }
    std::vector<double> out;
    out.reserve(traj.records.size());
    for (const auto& r : traj.records) {
        out.push_back(error_to_optimizer(r.u_stack, opt.u_star));
    }
    return out;
}

StorageEvaluator::StorageEvaluator(const NetworkedPlant& plant, const SteadyStateMaps& maps, const MixingMatrix& w,
                                   const CostModel& costs, const Matrix& P, double eta, const Vector& q, double d)
    : costs_(costs),
      G_(maps.G),
      Hq_(maps.H * q),
      state_input_gain_S_(maps.state_input_gain),
      state_disturbance_shift_(maps.state_disturbance_gain * q),
      P_(P),
      eta_(eta),
      d_(d),
      m_(plant.m()),
      selector_(plant.input_dims()) {
    if (P_.size() == 0) {
        throw PreconditionError("storage needs the Lyapunov matrix P (run stepsize_bound first)");
    }
    if (P_.rows() != plant.n() || P_.cols() != plant.n()) {
        throw DimensionError("storage: P must be n x n");
    }
    if (!(eta_ > 0.0)) {
        throw ParameterError("storage function needs eta > 0");
    }
    if (!(d_ > 0.0 && d_ < 1.0)) {
        throw ParameterError("storage weight d must lie in (0, 1)");
    }
    if (w.nodes() != costs.agents()) {
        throw DimensionError("storage: mixing matrix and costs disagree on N");
    }
    upper_neighbors_.resize(w.nodes());
    for (std::size_t i = 0; i < w.nodes(); ++i) {
        for (const auto& [j, wij] : w.neighbors(i)) {
            if (j > i) {
                upper_neighbors_[i].emplace_back(static_cast<Eigen::Index>(j), wij);
            }
        }
    }
    xt_.resize(plant.n());
    y_.resize(plant.p());
    applied_.resize(plant.m());
}

double StorageEvaluator::consensus_part(const Vector& u_stack) const {
    double total = 0.0;
    for (std::size_t i = 0; i < upper_neighbors_.size(); ++i) {
        const auto ui = u_stack.segment(static_cast<Eigen::Index>(i) * m_, m_);
        for (const auto& [j, wij] : upper_neighbors_[i]) {
            total += wij * (ui - u_stack.segment(j * m_, m_)).squaredNorm();
        }
    }
    return 0.5 * total;
}

StorageEvaluator::Parts StorageEvaluator::evaluate(const Vector& x, const Vector& u_stack) const {
    if (u_stack.size() != m_ * static_cast<Eigen::Index>(costs_.agents()) || x.size() != P_.rows()) {
        throw DimensionError("storage: x or u_stack dimension mismatch");
    }
    double cost_sum = 0.0;
    for (std::size_t i = 0; i < costs_.agents(); ++i) {
        const auto ui = u_stack.segment(static_cast<Eigen::Index>(i) * m_, m_);
        y_.noalias() = G_ * ui;
        y_ += Hq_;
        cost_sum += costs_.agent(i).value(ui, y_);
    }
    const double consensus = consensus_part(u_stack);
    selector_.apply_into(u_stack, applied_);
    xt_ = x - state_disturbance_shift_;
    xt_.noalias() -= state_input_gain_S_ * applied_;
    Parts parts;
    parts.V_x = xt_.dot(P_ * xt_);
    parts.V_u = consensus + eta_ * cost_sum;
    parts.U = (d_ / eta_) * consensus + d_ * cost_sum + (1.0 - d_) * parts.V_x;
    return parts;
}

StorageDiagnostics storage_diagnostics(const ClosedLoopTrajectory& traj, const StorageEvaluator& storage) {
    StorageDiagnostics diag;
    for (const auto& r : traj.records) {
        const auto parts = storage.evaluate(r.x, r.u_stack);
        if (!diag.U.empty() && parts.U > diag.U.back() + kStorageTolerance) {
            diag.violations.push_back(r.k);
        }
        diag.k.push_back(r.k);
        diag.V_u.push_back(parts.V_u);
        diag.V_x.push_back(parts.V_x);
        diag.U.push_back(parts.U);
    }
    return diag;
}

double optimal_storage_weight(const CertificateReport& report) {
    const double rho = report.norm_ATP * report.norm_ATP + report.lambdan_Q * report.lambda1_P;
    const double a = report.L_Phi * report.L_Phi / 4.0;
    const double b = report.L_h * report.L_h * rho;
    // (b - sqrt(a b)) / (b - a), written without the removable singularity at a = b.
    return std::sqrt(b) / (std::sqrt(a) + std::sqrt(b));
}

double storage_weight_bound(const CertificateReport& report, double d) {
    if (!(d > 0.0 && d < 1.0)) {
        throw ParameterError("storage weight d must lie in (0, 1)");
    }
    const double rho = report.norm_ATP * report.norm_ATP + report.lambdan_Q * report.lambda1_P;
    const double lh2 = report.L_h * report.L_h;
    const double first = d * report.mu / ((1.0 - d) * report.lambda1_P * lh2);
    const double second = d * (1.0 - d) * report.mu * report.lambdan_Q /
                          (d * d * report.L_Phi * report.L_Phi / 4.0 + (1.0 - d) * (1.0 - d) * lh2 * rho +
                           d * (1.0 - d) * report.L_h * report.L_Phi * report.norm_ATP);
    return std::min(first, second);
}

CertificateMonitor::CertificateMonitor(const CertificateReport& report, bool check_sigma)
    : report_(report), check_sigma_(check_sigma && report.has_sigma()) {}

void CertificateMonitor::observe(std::size_t k, double gamma_norm, double consensus_error, double storage,
                                 double err) {
    bool violated = false;
    if (counts_.steps == 0) {
        origin_ = k;
        e0_ = err;
    }
    ++counts_.steps;
    if (storage == storage) {
        if (last_storage_ == last_storage_) {
            const double inc = storage - last_storage_;
            counts_.max_storage_increase = std::max(counts_.max_storage_increase, inc);
            if (inc > kStorageTolerance) {
                ++counts_.storage;
                violated = true;
            }
        }
        last_storage_ = storage;
    }
    if (check_sigma_) {
        const double sig = report_.sigma;
        if (sig > 0.0) {
            counts_.max_gradient_ratio = std::max(counts_.max_gradient_ratio, gamma_norm / sig);
        }
        if (gamma_norm > sig * (1.0 + kBoundRelativeSlack)) {
            ++counts_.gradient;
            violated = true;
        }
        const double cb = report_.consensus_bound;
        if (cb > 0.0) {
            counts_.max_consensus_ratio = std::max(counts_.max_consensus_ratio, consensus_error / cb);
        }
        if (consensus_error > cb * (1.0 + kBoundRelativeSlack)) {
            ++counts_.consensus;
            violated = true;
        }
        if (report_.has_error_bound() && err == err && e0_ == e0_) {
            const double env = report_.envelope(k - origin_, e0_);
            counts_.max_envelope_ratio = std::max(counts_.max_envelope_ratio, err / env);
            if (err > env * (1.0 + kBoundRelativeSlack)) {
                ++counts_.envelope;
                violated = true;
            }
        }
    }
    if (violated && counts_.first_violation_step == std::numeric_limits<std::size_t>::max()) {
        counts_.first_violation_step = k;
    }
}

}  // namespace fdgd
