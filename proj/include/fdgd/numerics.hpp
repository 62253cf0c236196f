#pragma once

#include <Eigen/Dense>

#include <string_view>

// Dense linear-algebra kernels shared by every other module. All functions are
// pure; they validate their inputs and throw fdgd errors on contract breaches.
namespace fdgd::numerics {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kSchurMargin = 1e-12;
inline constexpr double kMaxCondition = 1e12;

// Throws ParameterError if any entry is NaN or infinite.
void require_finite(const Matrix& m, std::string_view what);
void require_finite(const Vector& v, std::string_view what);
void require_square(const Matrix& m, std::string_view what);

// Largest singular value (operator 2-norm).
[[nodiscard]] double spectral_norm(const Matrix& m);

struct SymmetricEigen {
    Vector values;   // nonincreasing
    Matrix vectors;  // columns match `values`
};

// Eigen-decomposition of a symmetric matrix. The input must be symmetric to
// kSymmetryTolerance (relative to its largest entry); it is symmetrized as
// (M + M^T)/2 before solving.
[[nodiscard]] SymmetricEigen sym_eigen(const Matrix& m);
[[nodiscard]] Vector sym_eigenvalues(const Matrix& m);

struct SchurCheck {
    bool stable = false;
    double spectral_radius = 0.0;
};

// True spectral radius of a general real matrix via the nonsymmetric
// eigensolver. The 2-norm is used only as a quick accept.
[[nodiscard]] double spectral_radius(const Matrix& a);
[[nodiscard]] SchurCheck is_schur(const Matrix& a);

struct LinearSolveInfo {
    double condition_estimate = 1.0;
    double residual_norm = 0.0;
};

// Solves M x = b with partial-pivot LU and one refinement step.
// Throws SingularityError when the 1-norm condition estimate exceeds 1e12.
[[nodiscard]] Vector solve_linear(const Matrix& m, const Vector& b, LinearSolveInfo* info = nullptr);
[[nodiscard]] Matrix solve_linear(const Matrix& m, const Matrix& b, LinearSolveInfo* info = nullptr);

// Solves A^T P A - P = -Q for P. A must be Schur stable and Q symmetric
// positive definite. Uses the Kronecker-vectorized system for n <= 30 and
// squared Smith doubling above that, followed by one residual correction.
[[nodiscard]] Matrix solve_discrete_lyapunov(const Matrix& a, const Matrix& q);

// Truncated series sum_k (A^T)^k Q A^k. Stops once the certified tail bound
// ||P_k|| * ||A^k||^2 / (1 - ||A^k||^2) drops below `tolerance`. Used as an
// independent cross-check for solve_discrete_lyapunov.
[[nodiscard]] Matrix lyapunov_series(const Matrix& a, const Matrix& q, double tolerance = 1e-14);

// Numerical rank with singular values above tolerance * sigma_max.
[[nodiscard]] Eigen::Index numerical_rank(const Matrix& m, double relative_tolerance);

}  // namespace fdgd::numerics
