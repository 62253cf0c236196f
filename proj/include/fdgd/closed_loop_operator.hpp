#pragma once

#include "fdgd/cost.hpp"
#include "fdgd/network.hpp"
#include "fdgd/plant.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace fdgd {

// With quadratic tracking costs the closed loop is affine in z = (x, u_stack):
//   z+ = M z + c,
//   M = [[A,              B S                                   ],
//        [-eta 1 (x) G^T C, W (x) I - eta diag(alpha) (x) I - eta 1 (x) G^T D S]],
//   c = [E q; eta 1 (x) G^T y_ref].
// The fixed point is stored as an offset from z_opt = (x*, 1 (x) u*) so the
// O(eta) distance survives cancellation, and z_k = z_eq + M^k (z_0 - z_eq) is
// evaluated through a table of repeated squares of M. This reaches horizons
// far beyond what stepping can cover in double precision.
class AffineClosedLoop {
public:
    AffineClosedLoop(const NetworkedPlant& plant, const MixingMatrix& w, const CostModel& costs, double eta,
                     const Vector& q, const Vector& u_star, const Vector& x_star);

    [[nodiscard]] const Matrix& M() const noexcept { return m_; }
    [[nodiscard]] const Vector& c() const noexcept { return c_; }
    [[nodiscard]] double spectral_radius() const noexcept { return radius_; }
    [[nodiscard]] Eigen::Index state_dim() const noexcept { return n_; }

    [[nodiscard]] Vector step(const Vector& z) const;
    // z_eq - z_opt.
    [[nodiscard]] const Vector& fixed_point_offset() const noexcept { return offset_; }
    [[nodiscard]] Vector fixed_point() const;
    [[nodiscard]] Vector stack(const Vector& x, const Vector& u_stack) const;

    // M^k v without forming M^k.
    [[nodiscard]] Vector power_apply(std::size_t k, const Vector& v) const;
    // z_k - z_opt for the trajectory started at z0.
    [[nodiscard]] Vector deviation_at(std::size_t k, const Vector& z0) const;
    // (1/N) sum_i ||u_(i) - u*|| for a deviation vector.
    [[nodiscard]] double mean_error(const Vector& deviation) const;

    // Smallest K with rho(M)^K <= decay.
    [[nodiscard]] std::size_t auto_horizon(double decay = 1e-12) const;

private:
    void ensure_squares(std::size_t k) const;

    Eigen::Index n_ = 0;
    Eigen::Index m_in_ = 0;
    Eigen::Index agents_ = 0;
    Matrix m_;
    Vector c_;
    Vector z_opt_;
    Vector offset_;
    double radius_ = 0.0;
    mutable std::vector<Matrix> squares_;  // M^(2^j)
};

struct PlateauEstimate {
    double plateau = 0.0;        // mean error over the sampled window
    std::size_t horizon = 0;     // K
    std::size_t window_begin = 0;
    std::size_t samples = 0;
    double fixed_point_error = 0.0;
    std::vector<std::size_t> sample_steps;
    std::vector<double> sample_errors;
};

// Mean of e^k sampled at `samples` evenly spaced steps over the final 5% of
// [0, horizon]. Without a horizon, auto_horizon() is used.
[[nodiscard]] PlateauEstimate affine_plateau(const AffineClosedLoop& loop, const Vector& z0,
                                             std::optional<std::size_t> horizon = std::nullopt,
                                             std::size_t samples = 200);

}  // namespace fdgd
