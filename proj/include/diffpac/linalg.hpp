#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace diffpac {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Strictness { strict, semidefinite };

/// Dense square matrix that is exactly symmetric. Construction replaces the
/// input by (M + M^T) / 2.
class SymmetricMatrix {
public:
    explicit SymmetricMatrix(const Matrix& entries);

    static SymmetricMatrix identity(Eigen::Index dim);

    Eigen::Index dim() const noexcept { return entries_.rows(); }
    const Matrix& matrix() const noexcept { return entries_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

private:
    Matrix entries_;
};

/// Symmetric positive (semi-)definite matrix with its eigendecomposition and,
/// for strict instances, its lower Cholesky factor.
///
/// Eigenvalues are accepted when they clear tol_psd = 1e-10 * max(1, max|lambda|):
/// strict requires lambda_min > tol_psd, semidefinite requires lambda_min > -tol_psd.
class SpdMatrix {
public:
    SpdMatrix(const Matrix& entries, Strictness strictness);
    SpdMatrix(const SymmetricMatrix& entries, Strictness strictness);

    static SpdMatrix identity(Eigen::Index dim);

    Eigen::Index dim() const noexcept { return base_.dim(); }
    const Matrix& matrix() const noexcept { return base_.matrix(); }
    const SymmetricMatrix& symmetric() const noexcept { return base_; }
    Strictness strictness() const noexcept { return strictness_; }
    bool is_strict() const noexcept { return strictness_ == Strictness::strict; }

    /// Ascending.
    const Vector& eigenvalues() const noexcept { return eigenvalues_; }
    /// Columns are orthonormal eigenvectors matching eigenvalues().
    const Matrix& eigenvectors() const noexcept { return eigenvectors_; }
    double min_eigenvalue() const { return eigenvalues_(0); }
    double max_eigenvalue() const { return eigenvalues_(eigenvalues_.size() - 1); }

    /// Lower Cholesky factor L with L L^T = matrix(). Strict instances only.
    const Matrix& cholesky_lower() const;
    Matrix inverse() const;
    Matrix solve(const Matrix& rhs) const;
    Vector solve(const Vector& rhs) const;
    double trace() const { return matrix().trace(); }

private:
    void require_strict(const char* operation) const;

    SymmetricMatrix base_;
    Strictness strictness_;
    Vector eigenvalues_;
    Matrix eigenvectors_;
    Matrix lower_;
};

/// Tolerance used to classify eigenvalues as positive / non-negative.
double psd_tolerance(const Vector& eigenvalues);

SpdMatrix make_spd(const Matrix& entries, Strictness strictness);

/// Natural-log determinant, 2 * sum(log(diag(L))).
double log_det(const SpdMatrix& m);

/// Solves A X + X A = Q for symmetric X in the eigenbasis of A.
SymmetricMatrix solve_continuous_lyapunov(const SpdMatrix& a, const SymmetricMatrix& q);

/// Solves X = M X M^T + Q. Requires spectral radius of M below one.
SymmetricMatrix solve_discrete_stein(const Matrix& m, const SymmetricMatrix& q);

double spectral_radius(const Matrix& m);

/// Residual norms used by the solver self-checks and the test suites.
double lyapunov_residual(const Matrix& a, const Matrix& x, const Matrix& q);
double stein_residual(const Matrix& m, const Matrix& x, const Matrix& q);

/// Q^T diag(eigenvalues) Q with eigenvalues uniform in [low, high] and Q a
/// Haar-distributed orthogonal matrix. Deterministic in seed.
SpdMatrix random_spd(Eigen::Index dim, double eigenvalue_low, double eigenvalue_high,
                     std::uint64_t seed);

/// Symmetric square root factor B = diag(sqrt(lambda)) V^T, so that B^T B = m.
Matrix symmetric_factor(const SpdMatrix& m);

}  // namespace diffpac
