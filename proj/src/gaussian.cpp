#include "diffpac/gaussian.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "diffpac/error.hpp"
#include "diffpac/random.hpp"

namespace diffpac {

namespace {

constexpr double kKlClampTolerance = 1e-12;
constexpr std::int64_t kMinMonteCarloDraws = 1000;

void require_same_dim(Eigen::Index a, Eigen::Index b, const char* operation) {
    if (a != b) {
        throw DimensionMismatchError(
            fmt::format("{}: dimensions {} and {} differ", operation, a, b));
    }
}

}  // namespace

GaussianMeasure::GaussianMeasure(Vector mean, SpdMatrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
    require_same_dim(mean_.size(), covariance_.dim(), "GaussianMeasure");
    if (!covariance_.is_strict()) {
        throw NotPositiveDefiniteError("GaussianMeasure: covariance must be strictly positive definite",
                                       covariance_.min_eigenvalue());
    }
    if (!mean_.allFinite()) {
        throw InvalidRangeError("GaussianMeasure: mean has non-finite entries");
    }
}

GaussianMeasure GaussianMeasure::standard(Eigen::Index dim) {
    return GaussianMeasure(Vector::Zero(dim), SpdMatrix::identity(dim));
}

double GaussianMeasure::log_normalizer() const {
    const double d = static_cast<double>(dim());
    return -0.5 * (d * std::log(2.0 * std::numbers::pi) + log_det(covariance_));
}

double GaussianMeasure::log_density(const Vector& x) const {
    require_same_dim(x.size(), dim(), "log_density");
    const Vector whitened =
        covariance_.cholesky_lower().triangularView<Eigen::Lower>().solve(x - mean_);
    return log_normalizer() - 0.5 * whitened.squaredNorm();
}

GaussianMeasure stationary_from_dynamics(const SpdMatrix& hessian, const Vector& minimizer,
                                         const SpdMatrix& noise_cov, double lr,
                                         std::int64_t batch_size) {
    require_same_dim(hessian.dim(), noise_cov.dim(), "stationary_from_dynamics");
    require_same_dim(hessian.dim(), minimizer.size(), "stationary_from_dynamics");
    if (!(lr > 0.0) || !std::isfinite(lr) || batch_size < 1) {
        throw InvalidRangeError(fmt::format(
            "stationary_from_dynamics: need lr > 0 and batch_size >= 1, got {} and {}", lr,
            batch_size));
    }
    const double scale = lr / static_cast<double>(batch_size);
    SymmetricMatrix rhs(scale * noise_cov.matrix());
    SymmetricMatrix sigma = solve_continuous_lyapunov(hessian, rhs);
    return GaussianMeasure(minimizer, SpdMatrix(sigma, Strictness::strict));
}

double kl_divergence(const GaussianMeasure& q, const GaussianMeasure& p) {
    require_same_dim(q.dim(), p.dim(), "kl_divergence");
    const SpdMatrix& sigma_p = p.covariance();
    const SpdMatrix& sigma_q = q.covariance();
    const double d = static_cast<double>(q.dim());

    const double trace_term = sigma_p.solve(sigma_q.matrix()).trace();
    const Vector diff = p.mean() - q.mean();
    const double mahalanobis = diff.dot(sigma_p.solve(diff));
    const double log_det_ratio = log_det(sigma_p) - log_det(sigma_q);

    const double kl = 0.5 * (trace_term - d + mahalanobis + log_det_ratio);
    if (kl < 0.0) {
        if (kl > -kKlClampTolerance) {
            return 0.0;
        }
        throw InternalError(fmt::format("kl_divergence: negative value {:.17g}", kl));
    }
    return kl;
}

Matrix sample(const GaussianMeasure& g, Eigen::Index count, std::uint64_t seed) {
    if (count < 1) {
        throw InvalidRangeError(fmt::format("sample: count {} < 1", count));
    }
    Rng rng(seed);
    Matrix draws(count, g.dim());
    fill_standard_normal(rng, draws);
    // Row i becomes mean + L z_i.
    draws = draws * g.covariance().cholesky_lower().transpose();
    draws.rowwise() += g.mean().transpose();
    return draws;
}

MomentEstimate empirical_moments(const Matrix& samples) {
    const Eigen::Index n = samples.rows();
    if (n < 2) {
        throw TooFewSamplesError(fmt::format("empirical_moments: {} rows, need at least 2", n));
    }
    Vector mean = samples.colwise().mean().transpose();
    const Matrix centered = samples.rowwise() - mean.transpose();
    Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    return MomentEstimate{std::move(mean), SymmetricMatrix(cov), n};
}

MonteCarloEstimate mc_kl_estimate(const GaussianMeasure& q, const GaussianMeasure& p,
                                  std::int64_t count, std::uint64_t seed) {
    require_same_dim(q.dim(), p.dim(), "mc_kl_estimate");
    if (count < kMinMonteCarloDraws) {
        throw InvalidRangeError(
            fmt::format("mc_kl_estimate: count {} < {}", count, kMinMonteCarloDraws));
    }
    const Eigen::Index d = q.dim();
    const Matrix& lq = q.covariance().cholesky_lower();
    const Matrix& lp = p.covariance().cholesky_lower();
    const double offset = q.log_normalizer() - p.log_normalizer();

    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(d);
    Vector x(d);
    // Welford accumulation of the log-density ratio.
    double mean = 0.0;
    double m2 = 0.0;
    for (std::int64_t k = 0; k < count; ++k) {
        for (Eigen::Index i = 0; i < d; ++i) {
            z(i) = normal(rng);
        }
        x.noalias() = lq * z;
        x += q.mean() - p.mean();
        const double p_quad = lp.triangularView<Eigen::Lower>().solve(x).squaredNorm();
        const double ratio = offset - 0.5 * z.squaredNorm() + 0.5 * p_quad;
        const double delta = ratio - mean;
        mean += delta / static_cast<double>(k + 1);
        m2 += delta * (ratio - mean);
    }
    const double n = static_cast<double>(count);
    const double variance = m2 / (n - 1.0);
    return MonteCarloEstimate{mean, std::sqrt(variance / n)};
}

}  // namespace diffpac
