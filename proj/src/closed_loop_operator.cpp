#include "fdgd/closed_loop_operator.hpp"

#include "fdgd/controller.hpp"
#include "fdgd/errors.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <sstream>

namespace fdgd {

namespace {

using LongMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using LongVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

}  // namespace

AffineClosedLoop::AffineClosedLoop(const NetworkedPlant& plant, const MixingMatrix& w, const CostModel& costs,
                                   double eta, const Vector& q, const Vector& u_star, const Vector& x_star) {
    const auto& quad = costs.quadratic();
    if (!quad) {
        throw UnsupportedError("the affine closed-loop operator needs quadratic tracking costs");
    }
    if (!(eta >= 0.0)) {
        throw ParameterError("stepsize eta must be nonnegative");
    }
    plant.require_stable();
    n_ = plant.n();
    m_in_ = plant.m();
    agents_ = static_cast<Eigen::Index>(costs.agents());
    if (w.nodes() != costs.agents() || plant.agents() != costs.agents() || u_star.size() != m_in_ ||
        x_star.size() != n_ || q.size() != plant.r() || costs.output_dim() != plant.p()) {
        throw DimensionError("affine closed loop: dimension mismatch");
    }
    const SteadyStateMaps maps = steady_state_maps(plant);
    const Matrix& g = maps.G;
    const Matrix s = Selector(plant.input_dims()).matrix();
    const Eigen::Index mn = m_in_ * agents_;
    const Eigen::Index dim = n_ + mn;
    const Matrix gtc = g.transpose() * plant.C();
    const Matrix gtds = g.transpose() * plant.D() * s;
    const Matrix& wm = w.W();

    m_ = Matrix::Zero(dim, dim);
    m_.topLeftCorner(n_, n_) = plant.A();
    m_.topRightCorner(n_, mn) = plant.B() * s;
    c_.resize(dim);
    c_.head(n_) = plant.E() * q;
    const Vector gty = g.transpose() * quad->y_ref;
    for (Eigen::Index i = 0; i < agents_; ++i) {
        const Eigen::Index ri = n_ + i * m_in_;
        m_.block(ri, 0, m_in_, n_) = -eta * gtc;
        m_.block(ri, n_, m_in_, mn) = -eta * gtds;
        for (Eigen::Index j = 0; j < agents_; ++j) {
            auto blk = m_.block(ri, n_ + j * m_in_, m_in_, m_in_);
            blk.diagonal().array() += wm(i, j);
        }
        m_.block(ri, ri, m_in_, m_in_).diagonal().array() -= eta * quad->alpha(i);
        c_.segment(ri, m_in_) = eta * gty;
    }

    z_opt_.resize(dim);
    z_opt_.head(n_) = x_star;
    for (Eigen::Index i = 0; i < agents_; ++i) {
        z_opt_.segment(n_ + i * m_in_, m_in_) = u_star;
    }

    // r = M z_opt + c - z_opt built from its structure: the consensus part
    // contributes only the row defect (sum_j w_ij - 1) u*, everything else is
    // the local gradient at the optimizer. Accumulated in long double.
    LongVector r(dim);
    {
        const LongMatrix a = plant.A().cast<long double>();
        const LongMatrix b = plant.B().cast<long double>();
        const LongVector xs = x_star.cast<long double>();
        const LongVector us = u_star.cast<long double>();
        r.head(n_) = a * xs + b * us + (plant.E().cast<long double>() * q.cast<long double>()) - xs;
        const LongVector ys = plant.C().cast<long double>() * xs + plant.D().cast<long double>() * us;
        const LongVector out_grad = g.transpose().cast<long double>() * (ys - quad->y_ref.cast<long double>());
        for (Eigen::Index i = 0; i < agents_; ++i) {
            long double defect = -1.0L;
            for (Eigen::Index j = 0; j < agents_; ++j) {
                defect += static_cast<long double>(wm(i, j));
            }
            const LongVector gamma = static_cast<long double>(quad->alpha(i)) * us + out_grad;
            r.segment(n_ + i * m_in_, m_in_) = defect * us - static_cast<long double>(eta) * gamma;
        }
    }

    Matrix i_minus_m = Matrix::Identity(dim, dim) - m_;
    Eigen::PartialPivLU<Matrix> lu(i_minus_m);
    Vector rd = r.cast<double>();
    offset_ = lu.solve(rd);
    // One refinement pass with the residual in extended precision.
    const LongVector res = r - (i_minus_m.cast<long double>() * offset_.cast<long double>());
    offset_ += lu.solve(Vector(res.cast<double>()));

    radius_ = numerics::spectral_radius(m_);
}

Vector AffineClosedLoop::step(const Vector& z) const {
    if (z.size() != m_.rows()) {
        throw DimensionError("affine closed loop: state dimension mismatch");
    }
    return m_ * z + c_;
}

Vector AffineClosedLoop::fixed_point() const { return z_opt_ + offset_; }

Vector AffineClosedLoop::stack(const Vector& x, const Vector& u_stack) const {
    if (x.size() != n_ || u_stack.size() != m_in_ * agents_) {
        throw DimensionError("affine closed loop: (x, u_stack) dimension mismatch");
    }
    Vector z(m_.rows());
    z << x, u_stack;
    return z;
}

void AffineClosedLoop::ensure_squares(std::size_t k) const {
    if (squares_.empty()) {
        squares_.push_back(m_);
    }
    while (squares_.size() < 64 && (k >> squares_.size()) != 0) {
        const Matrix& last = squares_.back();
        Matrix next = last * last;
        squares_.push_back(std::move(next));
    }
}

Vector AffineClosedLoop::power_apply(std::size_t k, const Vector& v) const {
    if (v.size() != m_.rows()) {
        throw DimensionError("affine closed loop: vector dimension mismatch");
    }
    ensure_squares(k);
    Vector out = v;
    for (std::size_t j = 0; j < squares_.size() && (k >> j) != 0; ++j) {
        if ((k >> j) & 1U) {
            out = squares_[j] * out;
        }
    }
    return out;
}

Vector AffineClosedLoop::deviation_at(std::size_t k, const Vector& z0) const {
    if (z0.size() != m_.rows()) {
        throw DimensionError("affine closed loop: initial state dimension mismatch");
    }
    const Vector transient = (z0 - z_opt_) - offset_;
    return offset_ + power_apply(k, transient);
}

double AffineClosedLoop::mean_error(const Vector& deviation) const {
    double total = 0.0;
    for (Eigen::Index i = 0; i < agents_; ++i) {
        total += deviation.segment(n_ + i * m_in_, m_in_).norm();
    }
    return total / static_cast<double>(agents_);
}

std::size_t AffineClosedLoop::auto_horizon(double decay) const {
    if (!(decay > 0.0 && decay < 1.0)) {
        throw ParameterError("horizon decay target must lie in (0, 1)");
    }
    if (!(radius_ < 1.0)) {
        std::ostringstream os;
        os << "closed-loop operator is not contracting (spectral radius " << radius_ << ")";
        throw StabilityError(os.str(), radius_);
    }
    if (radius_ == 0.0) {
        return 1;
    }
    const double rate = -std::log(radius_);
    const double k = std::ceil(std::log(decay) / -rate);
    if (!(k < 4.0e18)) {
        throw StabilityError("closed-loop operator decays too slowly for a finite horizon", radius_);
    }
    return std::max<std::size_t>(1, static_cast<std::size_t>(k));
}

PlateauEstimate affine_plateau(const AffineClosedLoop& loop, const Vector& z0, std::optional<std::size_t> horizon,
                               std::size_t samples) {
    if (samples == 0) {
        throw ParameterError("plateau estimate needs at least one sample");
    }
    PlateauEstimate est;
    est.horizon = horizon ? *horizon : loop.auto_horizon();
    const std::size_t window = est.horizon / 20;
    est.window_begin = est.horizon - window;
    const std::size_t count = std::min<std::size_t>(samples, window + 1);
    const std::size_t stride = count > 1 ? window / (count - 1) : 0;

    const Vector& offset = loop.fixed_point_offset();
    Vector transient = loop.power_apply(est.window_begin, (z0 - loop.fixed_point()));
    double total = 0.0;
    for (std::size_t j = 0; j < count; ++j) {
        if (j > 0) {
            transient = loop.power_apply(stride, transient);
        }
        const std::size_t k = est.window_begin + j * stride;
        const double e = loop.mean_error(offset + transient);
        est.sample_steps.push_back(k);
        est.sample_errors.push_back(e);
        total += e;
    }
    est.samples = count;
    est.plateau = total / static_cast<double>(count);
    est.fixed_point_error = loop.mean_error(offset);
    return est;
}

}  // namespace fdgd
