#pragma once

#include <cstdint>

#include "diffpac/linalg.hpp"

namespace diffpac {

/// N(mean, covariance) with a strictly positive-definite covariance.
class GaussianMeasure {
public:
    GaussianMeasure(Vector mean, SpdMatrix covariance);

    static GaussianMeasure standard(Eigen::Index dim);

    Eigen::Index dim() const noexcept { return mean_.size(); }
    const Vector& mean() const noexcept { return mean_; }
    const SpdMatrix& covariance() const noexcept { return covariance_; }

    /// -1/2 (d log(2 pi) + log det covariance).
    double log_normalizer() const;
    double log_density(const Vector& x) const;

private:
    Vector mean_;
    SpdMatrix covariance_;
};

/// Sample mean and unbiased (divisor n - 1) sample covariance.
struct MomentEstimate {
    Vector mean;
    SymmetricMatrix covariance;
    Eigen::Index sample_count;
};

/// Stationary law of the OU approximation of SGD around `minimizer`:
/// N(minimizer, Sigma) with A Sigma + Sigma A = (lr / batch_size) C.
GaussianMeasure stationary_from_dynamics(const SpdMatrix& hessian, const Vector& minimizer,
                                         const SpdMatrix& noise_cov, double lr,
                                         std::int64_t batch_size);

/// Closed-form KL(q || p) in nats. Values in (-1e-12, 0) are clamped to zero;
/// anything more negative raises InternalError.
double kl_divergence(const GaussianMeasure& q, const GaussianMeasure& p);

/// `count` x d matrix of draws mean + L z, L the lower Cholesky factor.
Matrix sample(const GaussianMeasure& g, Eigen::Index count, std::uint64_t seed);

MomentEstimate empirical_moments(const Matrix& samples);

struct MonteCarloEstimate {
    double estimate;
    double std_error;
};

/// Mean and standard error of log q(x) - log p(x) over `count` draws x ~ q.
MonteCarloEstimate mc_kl_estimate(const GaussianMeasure& q, const GaussianMeasure& p,
                                  std::int64_t count, std::uint64_t seed);

}  // namespace diffpac
