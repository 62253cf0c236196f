#pragma once

#include "fdgd/numerics.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace fdgd {

using numerics::Matrix;
using numerics::Vector;

// Contiguous per-agent block sizes of a stacked vector (n_i, m_i or r_i).
class Partition {
public:
    Partition() = default;
    explicit Partition(std::vector<Eigen::Index> sizes);

    [[nodiscard]] std::size_t agents() const noexcept { return sizes_.size(); }
    [[nodiscard]] Eigen::Index total() const noexcept { return total_; }
    [[nodiscard]] Eigen::Index size(std::size_t i) const { return sizes_.at(i); }
    [[nodiscard]] Eigen::Index offset(std::size_t i) const { return offsets_.at(i); }
    [[nodiscard]] const std::vector<Eigen::Index>& sizes() const noexcept { return sizes_; }

    // Uniform partition of `agents` blocks of size `block`.
    static Partition uniform(std::size_t agents, Eigen::Index block);

    friend bool operator==(const Partition&, const Partition&) = default;

private:
    std::vector<Eigen::Index> sizes_;
    std::vector<Eigen::Index> offsets_;
    Eigen::Index total_ = 0;
};

struct PlantMatrices {
    Matrix A, B, C, D, E;
};

// Networked LTI plant
//   x+ = A x + B u + E q,   y = C x + D u
// with N subsystems. B is block diagonal with respect to the state/input
// partitions: input block i actuates only state block i. The constructor
// checks structure and records the spectral radius; the Schur gate itself is
// enforced by validate() and by every analysis entry point.
class NetworkedPlant {
public:
    NetworkedPlant(PlantMatrices matrices, Partition state_dims, Partition input_dims,
                   Partition disturbance_dims);

    [[nodiscard]] std::size_t agents() const noexcept { return state_dims_.agents(); }
    [[nodiscard]] Eigen::Index n() const noexcept { return state_dims_.total(); }
    [[nodiscard]] Eigen::Index m() const noexcept { return input_dims_.total(); }
    [[nodiscard]] Eigen::Index p() const noexcept { return m_.C.rows(); }
    [[nodiscard]] Eigen::Index r() const noexcept { return disturbance_dims_.total(); }

    [[nodiscard]] const Matrix& A() const noexcept { return m_.A; }
    [[nodiscard]] const Matrix& B() const noexcept { return m_.B; }
    [[nodiscard]] const Matrix& C() const noexcept { return m_.C; }
    [[nodiscard]] const Matrix& D() const noexcept { return m_.D; }
    [[nodiscard]] const Matrix& E() const noexcept { return m_.E; }
    [[nodiscard]] const PlantMatrices& matrices() const noexcept { return m_; }

    [[nodiscard]] const Partition& state_dims() const noexcept { return state_dims_; }
    [[nodiscard]] const Partition& input_dims() const noexcept { return input_dims_; }
    [[nodiscard]] const Partition& disturbance_dims() const noexcept { return disturbance_dims_; }

    [[nodiscard]] double spectral_radius() const noexcept { return spectral_radius_; }
    [[nodiscard]] bool is_stable() const noexcept { return spectral_radius_ < 1.0 - numerics::kSchurMargin; }

    // Throws StabilityError unless A is Schur stable.
    void require_stable() const;

private:
    PlantMatrices m_;
    Partition state_dims_;
    Partition input_dims_;
    Partition disturbance_dims_;
    double spectral_radius_ = 0.0;
};

struct PlantState {
    Vector x;
    std::size_t k = 0;
};

struct ValidationReport {
    bool stable = false;
    double spectral_radius = 0.0;
    bool controllable = false;
    bool observable = false;
    std::vector<std::string> warnings;
};

inline constexpr double kRankTolerance = 1e-8;

// Schur stability is a hard gate (StabilityError); controllability and
// observability are Kalman rank checks reported as warnings.
[[nodiscard]] ValidationReport validate(const NetworkedPlant& plant);

// DC gains G = C (I - A)^{-1} B + D and H = C (I - A)^{-1} E. The state gains
// (I - A)^{-1} B and (I - A)^{-1} E are kept for equilibrium computations.
struct SteadyStateMaps {
    Matrix G;
    Matrix H;
    Matrix state_input_gain;
    Matrix state_disturbance_gain;
};

[[nodiscard]] SteadyStateMaps steady_state_maps(const NetworkedPlant& plant);

[[nodiscard]] PlantState step(const NetworkedPlant& plant, const PlantState& state, const Vector& u,
                              const Vector& q);
[[nodiscard]] Vector output(const NetworkedPlant& plant, const PlantState& state, const Vector& u);

// h(u_stack) = (I - A)^{-1} B S u_stack + (I - A)^{-1} E q, the state the plant
// settles at when the applied input S u_stack is held constant. `applied` is
// S u_stack (see controller::Selector).
[[nodiscard]] Vector equilibrium_shift(const SteadyStateMaps& maps, const Vector& applied, const Vector& q);

}  // namespace fdgd
