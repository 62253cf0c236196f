#include "fdgd/plant.hpp"

#include "fdgd/errors.hpp"

#include <sstream>

namespace fdgd {

namespace {

std::string shape(const Matrix& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

void expect_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream os;
        os << "plant matrix " << name << " is " << shape(m) << ", expected " << rows << "x" << cols;
        throw DimensionError(os.str());
    }
}

Matrix kalman_matrix(const Matrix& a, const Matrix& b) {
    const Eigen::Index n = a.rows();
    Matrix k(n, n * b.cols());
    Matrix block = b;
    for (Eigen::Index i = 0; i < n; ++i) {
        k.middleCols(i * b.cols(), b.cols()) = block;
        block = a * block;
    }
    return k;
}

}  // namespace

Partition::Partition(std::vector<Eigen::Index> sizes) : sizes_(std::move(sizes)) {
    offsets_.reserve(sizes_.size());
    for (Eigen::Index s : sizes_) {
        if (s < 0) {
            throw DimensionError("partition block sizes must be nonnegative");
        }
        offsets_.push_back(total_);
        total_ += s;
    }
}

Partition Partition::uniform(std::size_t agents, Eigen::Index block) {
    return Partition(std::vector<Eigen::Index>(agents, block));
}

NetworkedPlant::NetworkedPlant(PlantMatrices matrices, Partition state_dims, Partition input_dims,
                               Partition disturbance_dims)
    : m_(std::move(matrices)),
      state_dims_(std::move(state_dims)),
      input_dims_(std::move(input_dims)),
      disturbance_dims_(std::move(disturbance_dims)) {
    const std::size_t agents = state_dims_.agents();
    if (agents == 0) {
        throw DimensionError("plant must have at least one subsystem");
    }
    if (input_dims_.agents() != agents || disturbance_dims_.agents() != agents) {
        throw DimensionError("state, input and disturbance partitions must have the same agent count");
    }
    const Eigen::Index n = state_dims_.total();
    const Eigen::Index m = input_dims_.total();
    const Eigen::Index r = disturbance_dims_.total();
    const Eigen::Index p = m_.C.rows();
    expect_shape(m_.A, n, n, "A");
    expect_shape(m_.B, n, m, "B");
    expect_shape(m_.C, p, n, "C");
    expect_shape(m_.D, p, m, "D");
    expect_shape(m_.E, n, r, "E");
    numerics::require_finite(m_.A, "plant A");
    numerics::require_finite(m_.B, "plant B");
    numerics::require_finite(m_.C, "plant C");
    numerics::require_finite(m_.D, "plant D");
    numerics::require_finite(m_.E, "plant E");

    for (std::size_t i = 0; i < agents; ++i) {
        for (std::size_t j = 0; j < agents; ++j) {
            if (i == j) {
                continue;
            }
            const auto block = m_.B.block(state_dims_.offset(i), input_dims_.offset(j), state_dims_.size(i),
                                          input_dims_.size(j));
            if (block.size() > 0 && block.cwiseAbs().maxCoeff() != 0.0) {
                std::ostringstream os;
                os << "B must be block diagonal: input block " << j << " drives state block " << i;
                throw DimensionError(os.str());
            }
        }
    }
    spectral_radius_ = numerics::spectral_radius(m_.A);
}

void NetworkedPlant::require_stable() const {
    if (!is_stable()) {
        std::ostringstream os;
        os << "plant A is not Schur stable (spectral radius " << spectral_radius_ << ")";
        throw StabilityError(os.str(), spectral_radius_);
    }
}

ValidationReport validate(const NetworkedPlant& plant) {
    plant.require_stable();
    ValidationReport report;
    report.stable = true;
    report.spectral_radius = plant.spectral_radius();
    const Eigen::Index n = plant.n();
    report.controllable =
        plant.m() > 0 && numerics::numerical_rank(kalman_matrix(plant.A(), plant.B()), kRankTolerance) == n;
    report.observable = plant.p() > 0 &&
                        numerics::numerical_rank(kalman_matrix(plant.A().transpose(), plant.C().transpose()),
                                                 kRankTolerance) == n;
    if (!report.controllable) {
        report.warnings.emplace_back("(A, B) is not controllable at rank tolerance 1e-8");
    }
    if (!report.observable) {
        report.warnings.emplace_back("(A, C) is not observable at rank tolerance 1e-8");
    }
    return report;
}

SteadyStateMaps steady_state_maps(const NetworkedPlant& plant) {
    plant.require_stable();
    const Matrix i_minus_a = Matrix::Identity(plant.n(), plant.n()) - plant.A();
    SteadyStateMaps maps;
    maps.state_input_gain = numerics::solve_linear(i_minus_a, plant.B());
    maps.state_disturbance_gain = numerics::solve_linear(i_minus_a, plant.E());
    maps.G = plant.C() * maps.state_input_gain + plant.D();
    maps.H = plant.C() * maps.state_disturbance_gain;

    const double residual_b = (i_minus_a * maps.state_input_gain - plant.B()).norm();
    const double residual_e = (i_minus_a * maps.state_disturbance_gain - plant.E()).norm();
    if (residual_b > 1e-10 * (1.0 + plant.B().norm()) || residual_e > 1e-10 * (1.0 + plant.E().norm())) {
        throw SingularityError("steady-state solve residual exceeds 1e-10", 1.0 / 1e-10);
    }
    return maps;
}

PlantState step(const NetworkedPlant& plant, const PlantState& state, const Vector& u, const Vector& q) {
    if (state.x.size() != plant.n() || u.size() != plant.m() || q.size() != plant.r()) {
        throw DimensionError("plant step: state, input or disturbance dimension mismatch");
    }
    return PlantState{plant.A() * state.x + plant.B() * u + plant.E() * q, state.k + 1};
}

Vector output(const NetworkedPlant& plant, const PlantState& state, const Vector& u) {
    if (state.x.size() != plant.n() || u.size() != plant.m()) {
        throw DimensionError("plant output: state or input dimension mismatch");
    }
    return plant.C() * state.x + plant.D() * u;
}

Vector equilibrium_shift(const SteadyStateMaps& maps, const Vector& applied, const Vector& q) {
    if (applied.size() != maps.state_input_gain.cols() || q.size() != maps.state_disturbance_gain.cols()) {
        throw DimensionError("equilibrium_shift: input or disturbance dimension mismatch");
    }
    return maps.state_input_gain * applied + maps.state_disturbance_gain * q;
}

}  // namespace fdgd
