#include "diffpac/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "diffpac/error.hpp"
#include "diffpac/random.hpp"

namespace diffpac {

namespace {

constexpr Eigen::Index kSteinDirectMaxDim = 32;
constexpr double kSteinIterationTol = 1e-12;
// Doubling steps; 2^60 plain fixed-point iterations is far beyond the 10^6 cap.
constexpr int kSteinMaxDoublings = 60;

Matrix checked_square(const Matrix& entries, const char* what) {
    if (entries.rows() != entries.cols()) {
        throw NotSquareError(fmt::format("{}: matrix is {}x{}, expected square", what,
                                         entries.rows(), entries.cols()));
    }
    if (entries.rows() < 1) {
        throw NotSquareError(fmt::format("{}: matrix has dimension 0", what));
    }
    if (!entries.allFinite()) {
        throw InvalidRangeError(fmt::format("{}: matrix has non-finite entries", what));
    }
    return entries;
}

// Scale-aware threshold for the solver self-checks; breaching it means the
// solve broke down rather than rounding noise.
double breakdown_tolerance(double q_norm, double operator_norm, double x_norm) {
    return 1e-10 * (1.0 + q_norm + 2.0 * operator_norm * x_norm);
}

}  // namespace

SymmetricMatrix::SymmetricMatrix(const Matrix& entries)
    : entries_(checked_square(entries, "SymmetricMatrix")) {
    entries_ = 0.5 * (entries_ + entries_.transpose()).eval();
}

SymmetricMatrix SymmetricMatrix::identity(Eigen::Index dim) {
    return SymmetricMatrix(Matrix::Identity(dim, dim));
}

double psd_tolerance(const Vector& eigenvalues) {
    return 1e-10 * std::max(1.0, eigenvalues.cwiseAbs().maxCoeff());
}

SpdMatrix::SpdMatrix(const Matrix& entries, Strictness strictness)
    : SpdMatrix(SymmetricMatrix(entries), strictness) {}

SpdMatrix::SpdMatrix(const SymmetricMatrix& entries, Strictness strictness)
    : base_(entries), strictness_(strictness) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(base_.matrix());
    if (eig.info() != Eigen::Success) {
        throw NotPositiveDefiniteError("make_spd: eigendecomposition failed",
                                       std::numeric_limits<double>::quiet_NaN());
    }
    eigenvalues_ = eig.eigenvalues();
    eigenvectors_ = eig.eigenvectors();

    const double tol = psd_tolerance(eigenvalues_);
    const double lambda_min = eigenvalues_(0);
    const bool ok = strictness_ == Strictness::strict ? lambda_min > tol : lambda_min > -tol;
    if (!ok) {
        throw NotPositiveDefiniteError(
            fmt::format("make_spd: smallest eigenvalue {:.17g} fails the {} check (tol {:.3g})",
                        lambda_min,
                        strictness_ == Strictness::strict ? "strict" : "semidefinite", tol),
            lambda_min);
    }
    if (strictness_ == Strictness::strict) {
        Eigen::LLT<Matrix> llt(base_.matrix());
        if (llt.info() != Eigen::Success) {
            throw NotPositiveDefiniteError("make_spd: Cholesky factorization failed", lambda_min);
        }
        lower_ = llt.matrixL();
    }
}

SpdMatrix SpdMatrix::identity(Eigen::Index dim) {
    return SpdMatrix(Matrix::Identity(dim, dim), Strictness::strict);
}

void SpdMatrix::require_strict(const char* operation) const {
    if (strictness_ != Strictness::strict) {
        throw NotPositiveDefiniteError(
            fmt::format("{}: requires a strictly positive-definite matrix", operation),
            min_eigenvalue());
    }
}

const Matrix& SpdMatrix::cholesky_lower() const {
    require_strict("cholesky_lower");
    return lower_;
}

Matrix SpdMatrix::inverse() const {
    return solve(Matrix(Matrix::Identity(dim(), dim())));
}

Matrix SpdMatrix::solve(const Matrix& rhs) const {
    require_strict("solve");
    if (rhs.rows() != dim()) {
        throw DimensionMismatchError(
            fmt::format("solve: rhs has {} rows, matrix has dimension {}", rhs.rows(), dim()));
    }
    Matrix y = lower_.triangularView<Eigen::Lower>().solve(rhs);
    return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Vector SpdMatrix::solve(const Vector& rhs) const {
    return solve(Matrix(rhs)).col(0);
}

SpdMatrix make_spd(const Matrix& entries, Strictness strictness) {
    return SpdMatrix(entries, strictness);
}

double log_det(const SpdMatrix& m) {
    const Matrix& lower = m.cholesky_lower();
    return 2.0 * lower.diagonal().array().log().sum();
}

double lyapunov_residual(const Matrix& a, const Matrix& x, const Matrix& q) {
    return (a * x + x * a - q).norm();
}

double stein_residual(const Matrix& m, const Matrix& x, const Matrix& q) {
    return (x - m * x * m.transpose() - q).norm();
}

SymmetricMatrix solve_continuous_lyapunov(const SpdMatrix& a, const SymmetricMatrix& q) {
    if (!a.is_strict()) {
        throw NotPositiveDefiniteError(
            "solve_continuous_lyapunov: A must be strictly positive definite", a.min_eigenvalue());
    }
    if (a.dim() != q.dim()) {
        throw DimensionMismatchError(fmt::format(
            "solve_continuous_lyapunov: A is {0}x{0} but Q is {1}x{1}", a.dim(), q.dim()));
    }
    const Matrix& v = a.eigenvectors();
    const Vector& lambda = a.eigenvalues();
    Matrix rotated = v.transpose() * q.matrix() * v;
    for (Eigen::Index j = 0; j < rotated.cols(); ++j) {
        for (Eigen::Index i = 0; i < rotated.rows(); ++i) {
            rotated(i, j) /= lambda(i) + lambda(j);
        }
    }
    SymmetricMatrix x(v * rotated * v.transpose());

    const double residual = lyapunov_residual(a.matrix(), x.matrix(), q.matrix());
    const double tol = breakdown_tolerance(q.matrix().norm(), a.matrix().norm(), x.matrix().norm());
    if (!(residual <= tol)) {
        throw ResidualTooLargeError(fmt::format(
            "solve_continuous_lyapunov: residual {:.3g} exceeds {:.3g}", residual, tol));
    }
    return x;
}

double spectral_radius(const Matrix& m) {
    checked_square(m, "spectral_radius");
    Eigen::EigenSolver<Matrix> eig(m, false);
    if (eig.info() != Eigen::Success) {
        throw SpectralRadiusTooLargeError("spectral_radius: eigenvalue computation failed");
    }
    return eig.eigenvalues().cwiseAbs().maxCoeff();
}

SymmetricMatrix solve_discrete_stein(const Matrix& m, const SymmetricMatrix& q) {
    checked_square(m, "solve_discrete_stein");
    if (m.rows() != q.dim()) {
        throw DimensionMismatchError(fmt::format(
            "solve_discrete_stein: M is {0}x{0} but Q is {1}x{1}", m.rows(), q.dim()));
    }
    const double rho = spectral_radius(m);
    if (!(rho < 1.0)) {
        throw SpectralRadiusTooLargeError(fmt::format(
            "solve_discrete_stein: spectral radius {:.17g} >= 1, chain is not stationary", rho));
    }

    const Eigen::Index n = m.rows();
    Matrix x;
    if (n <= kSteinDirectMaxDim) {
        // Column-major vec: vec(M X M^T) = (M kron M) vec(X).
        const Eigen::Index nn = n * n;
        Matrix system = Matrix::Identity(nn, nn);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                system.block(i * n, j * n, n, n) -= m(i, j) * m;
            }
        }
        Vector rhs = Eigen::Map<const Vector>(q.matrix().data(), nn);
        Vector solution = system.partialPivLu().solve(rhs);
        x = Eigen::Map<const Matrix>(solution.data(), n, n);
    } else {
        // Doubling form of X <- M X M^T + Q: after k steps X sums 2^k terms.
        x = q.matrix();
        Matrix power = m;
        for (int k = 0; k < kSteinMaxDoublings; ++k) {
            Matrix increment = power * x * power.transpose();
            x += increment;
            if (increment.norm() <= kSteinIterationTol * (1.0 + x.norm())) {
                break;
            }
            power = (power * power).eval();
        }
    }
    SymmetricMatrix result(x);

    const double residual = stein_residual(m, result.matrix(), q.matrix());
    const double tol = breakdown_tolerance(q.matrix().norm(), m.norm() * m.norm(), result.matrix().norm());
    if (!(residual <= tol)) {
        throw ResidualTooLargeError(
            fmt::format("solve_discrete_stein: residual {:.3g} exceeds {:.3g}", residual, tol));
    }
    return result;
}

SpdMatrix random_spd(Eigen::Index dim, double eigenvalue_low, double eigenvalue_high,
                     std::uint64_t seed) {
    if (dim < 1) {
        throw InvalidRangeError(fmt::format("random_spd: dimension {} < 1", dim));
    }
    if (!(eigenvalue_low > 0.0) || !(eigenvalue_low <= eigenvalue_high) ||
        !std::isfinite(eigenvalue_high)) {
        throw InvalidRangeError(fmt::format(
            "random_spd: need 0 < low <= high, got [{}, {}]", eigenvalue_low, eigenvalue_high));
    }
    Rng rng(seed);
    Matrix gaussian(dim, dim);
    fill_standard_normal(rng, gaussian);
    Eigen::HouseholderQR<Matrix> qr(gaussian);
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < dim; ++j) {
        if (r(j, j) < 0.0) {
            q.col(j) = -q.col(j);
        }
    }
    std::uniform_real_distribution<double> uniform(eigenvalue_low, eigenvalue_high);
    Vector spectrum(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        spectrum(i) = eigenvalue_low == eigenvalue_high ? eigenvalue_low : uniform(rng);
    }
    return SpdMatrix(Matrix(q * spectrum.asDiagonal() * q.transpose()), Strictness::strict);
}

Matrix symmetric_factor(const SpdMatrix& m) {
    Vector root = m.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return root.asDiagonal() * m.eigenvectors().transpose();
}

}  // namespace diffpac
