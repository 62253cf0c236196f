#include "fdgd/numerics.hpp"

#include "fdgd/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace fdgd::numerics {

namespace {

std::string describe(std::string_view what, Eigen::Index rows, Eigen::Index cols) {
    std::ostringstream os;
    os << what << " (" << rows << "x" << cols << ")";
    return os.str();
}

Matrix symmetrized(const Matrix& m) {
    require_square(m, "symmetric matrix");
    require_finite(m, "symmetric matrix");
    if (m.size() == 0) {
        return m;
    }
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    const double asymmetry = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asymmetry > kSymmetryTolerance * scale) {
        std::ostringstream os;
        os << "matrix is not symmetric: max |M - M^T| = " << asymmetry;
        throw ParameterError(os.str());
    }
    return 0.5 * (m + m.transpose());
}

// I - (A^T kron A^T) acting on column-major vec(P).
Matrix lyapunov_operator(const Matrix& a) {
    const Eigen::Index n = a.rows();
    Matrix k = Matrix::Identity(n * n, n * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double aji = a(j, i);
            if (aji == 0.0) {
                continue;
            }
            for (Eigen::Index r = 0; r < n; ++r) {
                for (Eigen::Index c = 0; c < n; ++c) {
                    k(i * n + r, j * n + c) -= aji * a(c, r);
                }
            }
        }
    }
    return k;
}

Matrix unvec(const Vector& v, Eigen::Index n) {
    return Eigen::Map<const Matrix>(v.data(), n, n);
}

Vector vec(const Matrix& m) {
    return Eigen::Map<const Vector>(m.data(), m.size());
}

// Smith doubling: P_{j+1} = P_j + A_j^T P_j A_j with A_{j+1} = A_j^2.
Matrix lyapunov_doubling(const Matrix& a, const Matrix& q) {
    Matrix p = q;
    Matrix aj = a;
    for (int iter = 0; iter < 64; ++iter) {
        p += aj.transpose() * p * aj;
        aj = aj * aj;
        const double na = aj.norm();
        if (na < 1.0) {
            const double tail = na * na * p.norm() / (1.0 - na * na);
            if (tail <= 1e-17 * std::max(1.0, p.norm())) {
                break;
            }
        }
    }
    return p;
}

Matrix lyapunov_residual(const Matrix& a, const Matrix& p, const Matrix& q) {
    return a.transpose() * p * a - p + q;
}

}  // namespace

void require_finite(const Matrix& m, std::string_view what) {
    if (!m.allFinite()) {
        throw ParameterError(std::string(what) + " contains NaN or Inf entries");
    }
}

void require_finite(const Vector& v, std::string_view what) {
    if (!v.allFinite()) {
        throw ParameterError(std::string(what) + " contains NaN or Inf entries");
    }
}

void require_square(const Matrix& m, std::string_view what) {
    if (m.rows() != m.cols()) {
        throw DimensionError(describe(std::string(what) + " must be square", m.rows(), m.cols()));
    }
}

double spectral_norm(const Matrix& m) {
    if (m.size() == 0) {
        throw DimensionError(describe("spectral_norm of an empty matrix", m.rows(), m.cols()));
    }
    require_finite(m, "spectral_norm input");
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

SymmetricEigen sym_eigen(const Matrix& m) {
    const Matrix s = symmetrized(m);
    SymmetricEigen out;
    if (s.size() == 0) {
        return out;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(s);
    if (solver.info() != Eigen::Success) {
        throw Error("symmetric eigensolver failed to converge");
    }
    // Eigen returns ascending order.
    out.values = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();
    return out;
}

Vector sym_eigenvalues(const Matrix& m) {
    const Matrix s = symmetrized(m);
    if (s.size() == 0) {
        return Vector();
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(s, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw Error("symmetric eigensolver failed to converge");
    }
    return solver.eigenvalues().reverse();
}

double spectral_radius(const Matrix& a) {
    require_square(a, "spectral_radius input");
    require_finite(a, "spectral_radius input");
    if (a.size() == 0) {
        return 0.0;
    }
    Eigen::EigenSolver<Matrix> solver(a, false);
    if (solver.info() != Eigen::Success) {
        throw Error("nonsymmetric eigensolver failed to converge");
    }
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

SchurCheck is_schur(const Matrix& a) {
    SchurCheck out;
    out.spectral_radius = spectral_radius(a);
    out.stable = out.spectral_radius < 1.0 - kSchurMargin;
    return out;
}

Vector solve_linear(const Matrix& m, const Vector& b, LinearSolveInfo* info) {
    require_square(m, "solve_linear matrix");
    if (b.size() != m.rows()) {
        throw DimensionError(describe("solve_linear right-hand side does not match matrix", b.size(), 1));
    }
    require_finite(m, "solve_linear matrix");
    require_finite(b, "solve_linear right-hand side");
    if (m.size() == 0) {
        return Vector();
    }
    Eigen::PartialPivLU<Matrix> lu(m);
    const double rcond = lu.rcond();
    const double cond = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (!(cond <= kMaxCondition)) {
        throw SingularityError("matrix is singular or near-singular (condition estimate " +
                                   std::to_string(cond) + ")",
                               cond);
    }
    Vector x = lu.solve(b);
    x += lu.solve(b - m * x);
    if (info != nullptr) {
        info->condition_estimate = cond;
        info->residual_norm = (m * x - b).norm();
    }
    return x;
}

Matrix solve_linear(const Matrix& m, const Matrix& b, LinearSolveInfo* info) {
    require_square(m, "solve_linear matrix");
    if (b.rows() != m.rows()) {
        throw DimensionError(describe("solve_linear right-hand side does not match matrix", b.rows(), b.cols()));
    }
    require_finite(m, "solve_linear matrix");
    require_finite(b, "solve_linear right-hand side");
    if (m.size() == 0) {
        return Matrix(0, b.cols());
    }
    Eigen::PartialPivLU<Matrix> lu(m);
    const double rcond = lu.rcond();
    const double cond = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (!(cond <= kMaxCondition)) {
        throw SingularityError("matrix is singular or near-singular (condition estimate " +
                                   std::to_string(cond) + ")",
                               cond);
    }
    Matrix x = lu.solve(b);
    x += lu.solve(b - m * x);
    if (info != nullptr) {
        info->condition_estimate = cond;
        info->residual_norm = (m * x - b).norm();
    }
    return x;
}

Matrix solve_discrete_lyapunov(const Matrix& a, const Matrix& q) {
    require_square(a, "Lyapunov A");
    require_square(q, "Lyapunov Q");
    if (a.rows() != q.rows()) {
        throw DimensionError("Lyapunov A and Q dimensions differ");
    }
    require_finite(a, "Lyapunov A");
    const Matrix qs = symmetrized(q);
    const Eigen::Index n = a.rows();
    if (n == 0) {
        return Matrix(0, 0);
    }
    if (sym_eigenvalues(qs).minCoeff() <= 0.0) {
        throw ParameterError("Lyapunov Q must be positive definite");
    }
    const SchurCheck schur = is_schur(a);
    if (!schur.stable) {
        throw StabilityError("Lyapunov A is not Schur stable (spectral radius " +
                                 std::to_string(schur.spectral_radius) + ")",
                             schur.spectral_radius);
    }

    Matrix p;
    if (n <= 30) {
        Eigen::PartialPivLU<Matrix> lu(lyapunov_operator(a));
        p = unvec(lu.solve(vec(qs)), n);
        p = 0.5 * (p + p.transpose()).eval();
        const Matrix r = lyapunov_residual(a, p, qs);
        p -= unvec(lu.solve(vec(-r)), n);
    } else {
        p = lyapunov_doubling(a, qs);
        p = 0.5 * (p + p.transpose()).eval();
        const Matrix r = lyapunov_residual(a, p, qs);
        // A^T D A - D = -R has the series solution sum (A^T)^k R A^k.
        p += lyapunov_doubling(a, r);
    }
    return 0.5 * (p + p.transpose());
}

Matrix lyapunov_series(const Matrix& a, const Matrix& q, double tolerance) {
    require_square(a, "Lyapunov A");
    if (a.rows() != q.rows() || q.rows() != q.cols()) {
        throw DimensionError("Lyapunov A and Q dimensions differ");
    }
    const SchurCheck schur = is_schur(a);
    if (!schur.stable) {
        throw StabilityError("Lyapunov A is not Schur stable", schur.spectral_radius);
    }
    const Eigen::Index n = a.rows();
    Matrix p = Matrix::Zero(n, n);
    Matrix ak = Matrix::Identity(n, n);
    for (long k = 0; k < 10'000'000; ++k) {
        p += ak.transpose() * q * ak;
        ak = ak * a;
        // Frobenius norms bound the 2-norms from above, so the tail bound stays certified.
        const double na = ak.norm();
        if (na < 1.0) {
            const double tail = na * na * p.norm() / (1.0 - na * na);
            if (tail < tolerance) {
                return p;
            }
        }
    }
    throw Error("Lyapunov series did not reach the requested tolerance");
}

Eigen::Index numerical_rank(const Matrix& m, double relative_tolerance) {
    if (m.size() == 0) {
        return 0;
    }
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector& s = svd.singularValues();
    const double cutoff = relative_tolerance * s(0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cutoff) {
            ++rank;
        }
    }
    return rank;
}

}  // namespace fdgd::numerics
