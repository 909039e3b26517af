#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "diffpac/bounds.hpp"
#include "diffpac/gaussian.hpp"
#include "diffpac/serialize.hpp"
#include "diffpac/sgd.hpp"

namespace diffpac {

/// Linear-Gaussian regression: x ~ N(0, feature_cov), y = x^T w* + noise_std * eps.
/// Under the squared loss 1/2 (y - x^T theta)^2 both the empirical and the
/// population risk are exactly quadratic in theta.
class RegressionTask {
public:
    RegressionTask(Vector true_weights, SpdMatrix feature_cov, double noise_std,
                   std::int64_t sample_size);

    Eigen::Index dim() const noexcept { return true_weights_.size(); }
    const Vector& true_weights() const noexcept { return true_weights_; }
    const SpdMatrix& feature_cov() const noexcept { return feature_cov_; }
    double noise_std() const noexcept { return noise_std_; }
    std::int64_t sample_size() const noexcept { return sample_size_; }

    RegressionTask with_sample_size(std::int64_t n) const;

private:
    Vector true_weights_;
    SpdMatrix feature_cov_;
    double noise_std_;
    std::int64_t sample_size_;
};

struct Dataset {
    Matrix features;
    Vector targets;
    std::uint64_t seed;
};

struct GapTrial {
    double expected_risk;
    double empirical_risk;
    double gap;
    double bound_value;
    bool violated;
    double kl;
    std::uint64_t seed;
    std::int64_t sample_size;
};

enum class PosteriorMode { analytic, simulated };

Dataset generate_dataset(const RegressionTask& task, std::uint64_t seed);

/// (1/N) sum 1/2 (y_i - x_i^T theta)^2 by direct summation.
double empirical_risk_direct(const Dataset& data, const Vector& theta);

/// Hessian (1/N) X^T X, least-squares minimizer, minimum empirical risk.
/// Throws SingularDesignError when the Hessian is not strictly positive definite.
QuadraticLoss empirical_quadratic(const Dataset& data);

/// E_{theta ~ N(mean, cov)} loss(theta) = offset + 1/2 (mean - theta*)^T A (mean - theta*) + 1/2 tr(A cov).
double expected_risk_gaussian(const QuadraticLoss& loss, const GaussianMeasure& q);
/// Overload accepting a semidefinite covariance, e.g. for point-mass limits.
double expected_risk_gaussian(const QuadraticLoss& loss, const Vector& mean, const SpdMatrix& covariance);

/// Population risk: Hessian feature_cov, minimizer w*, offset noise_std^2 / 2.
QuadraticLoss population_quadratic(const RegressionTask& task);

/// One end-to-end bound check. `steps` is only used in simulated mode.
GapTrial gap_trial(const RegressionTask& task, const SgdDynamics& sgd, const SampleSpec& spec,
                   const GaussianMeasure& prior, std::int64_t steps, std::uint64_t seed,
                   PosteriorMode mode = PosteriorMode::analytic);

struct SummaryStats {
    double mean;
    double std_dev;
    double min;
    double max;
};

SummaryStats summarize(const std::vector<double>& values);

/// Attached to every experiment result: the PAC-Bayes bound used assumes a
/// bounded loss and the squared loss is not bounded.
extern const char* const kUnboundedLossNote;

struct ValidityResult {
    std::int64_t violation_count;
    SummaryStats gaps;
    SummaryStats bounds;
    std::vector<GapTrial> trials;
    std::string notes;
};

/// Trial t runs gap_trial with seed derive_seed(master_seed, t).
ValidityResult bound_validity_experiment(const RegressionTask& task, const SgdDynamics& sgd,
                                         const SampleSpec& spec, const GaussianMeasure& prior,
                                         std::int64_t trials, std::uint64_t master_seed,
                                         PosteriorMode mode = PosteriorMode::analytic,
                                         std::int64_t steps = 0);

struct ScalingRow {
    std::int64_t sample_size;
    double mean_bound;
    double mean_gap;
    /// mean_bound(4N) / mean_bound(N) when 4N is also in the grid, else NaN.
    double ratio_4n;
};

/// Per N, runs `trials_per_n` gap trials with seeds shared across N.
std::vector<ScalingRow> scaling_experiment(const RegressionTask& task_template,
                                           const std::vector<std::int64_t>& sample_sizes,
                                           const SgdDynamics& sgd, double delta,
                                           std::uint64_t master_seed,
                                           std::int64_t trials_per_n = 20);

/// CSV columns: seed,N,gap,bound,violated
void write_trials_csv(std::ostream& out, const std::vector<GapTrial>& trials);
JsonObject to_json(const ValidityResult& result, const SampleSpec& spec);

/// CSV columns: N,mean_bound,mean_gap,ratio_4n
void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows);
JsonObject to_json(const std::vector<ScalingRow>& rows);

}  // namespace diffpac
