#pragma once

// Reference computations written independently of the library routines they
// check: vectorized linear systems, truncated series, eigenvalue formulas.

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double log_det_eigen(const MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
    return es.eigenvalues().array().log().sum();
}

// vec(AX + XA) = (I kron A + A^T kron I) vec(X), solved with full pivoting.
inline MatrixXd lyapunov_kron(const MatrixXd& a, const MatrixXd& q) {
    const Eigen::Index n = a.rows();
    const MatrixXd id = MatrixXd::Identity(n, n);
    MatrixXd op = MatrixXd::Zero(n * n, n * n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            op.block(i * n, j * n, n, n) += id(i, j) * a + a(j, i) * id;
        }
    const VectorXd vq = Eigen::Map<const VectorXd>(q.data(), n * n);
    const VectorXd vx = op.fullPivLu().solve(vq);
    return Eigen::Map<const MatrixXd>(vx.data(), n, n);
}

// X = sum_k M^k Q (M^T)^k, truncated once terms stop mattering.
inline MatrixXd stein_series(const MatrixXd& m, const MatrixXd& q, int max_terms = 200000) {
    MatrixXd x = q;
    MatrixXd term = q;
    for (int k = 0; k < max_terms; ++k) {
        term = m * term * m.transpose();
        x += term;
        if (term.norm() <= 1e-17 * x.norm()) break;
    }
    return x;
}

inline double gaussian_kl_eigen(const VectorXd& mq, const MatrixXd& sq, const VectorXd& mp,
                                const MatrixXd& sp) {
    // Generalized eigenvalues of (Sq, Sp) give both the trace and the log-det term.
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ges(sq, sp);
    const VectorXd lam = ges.eigenvalues();
    const VectorXd diff = mp - mq;
    const double quad = diff.dot(sp.ldlt().solve(diff));
    return 0.5 * ((lam.array() - 1.0 - lam.array().log()).sum() + quad);
}

inline MatrixXd random_spd(Eigen::Index n, double low, double high, std::uint64_t seed) {
    std::mt19937 rng(static_cast<std::uint32_t>(seed * 2654435761u + 17));
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform(low, high);
    MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) g(i, j) = normal(rng);
    const MatrixXd qm = g.householderQr().householderQ();
    VectorXd lam(n);
    for (Eigen::Index i = 0; i < n; ++i) lam(i) = uniform(rng);
    const MatrixXd s = qm * lam.asDiagonal() * qm.transpose();
    return 0.5 * (s + s.transpose());
}

inline VectorXd random_vector(Eigen::Index n, double scale, std::uint64_t seed) {
    std::mt19937 rng(static_cast<std::uint32_t>(seed * 40503u + 3));
    std::normal_distribution<double> normal(0.0, scale);
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
    return v;
}

inline double rel_frobenius(const MatrixXd& a, const MatrixXd& ref) {
    return (a - ref).norm() / ref.norm();
}

}  // namespace oracle
