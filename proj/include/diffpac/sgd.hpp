#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "diffpac/gaussian.hpp"
#include "diffpac/linalg.hpp"

namespace diffpac {

/// loss(theta) = offset + 1/2 (theta - minimizer)^T A (theta - minimizer).
class QuadraticLoss {
public:
    QuadraticLoss(SpdMatrix hessian, Vector minimizer, double offset = 0.0);

    Eigen::Index dim() const noexcept { return minimizer_.size(); }
    const SpdMatrix& hessian() const noexcept { return hessian_; }
    const Vector& minimizer() const noexcept { return minimizer_; }
    double offset() const noexcept { return offset_; }

    double value(const Vector& theta) const;
    Vector gradient(const Vector& theta) const;

private:
    SpdMatrix hessian_;
    Vector minimizer_;
    double offset_;
};

/// Constant learning rate, batch size and gradient-noise factor B.
/// The per-example gradient noise covariance is C = B^T B (may be singular).
class SgdDynamics {
public:
    SgdDynamics(double lr, std::int64_t batch_size, Matrix noise_factor);

    /// Picks B = diag(sqrt(lambda)) V^T so that B^T B equals `noise_cov`.
    static SgdDynamics from_noise_cov(double lr, std::int64_t batch_size, const SpdMatrix& noise_cov);

    double lr() const noexcept { return lr_; }
    std::int64_t batch_size() const noexcept { return batch_size_; }
    const Matrix& noise_factor() const noexcept { return noise_factor_; }
    const SpdMatrix& noise_cov() const noexcept { return noise_cov_; }
    Eigen::Index dim() const noexcept { return noise_factor_.rows(); }

private:
    double lr_;
    std::int64_t batch_size_;
    Matrix noise_factor_;
    SpdMatrix noise_cov_;
};

struct Trajectory {
    /// One recorded state per row: steps 0, stride, 2 stride, ...
    Matrix states;
    /// State after the last step, whether or not it was recorded.
    Vector final_state;
    std::int64_t stride;
    std::int64_t total_steps;
    std::uint64_t seed;

    Eigen::Index record_count() const noexcept { return states.rows(); }
};

/// state - lr A (state - theta*) + (lr / sqrt(batch_size)) B^T noise_draw.
/// The injected noise has covariance (lr^2 / batch_size) C with C = B^T B.
Vector sgd_step(const Vector& state, const QuadraticLoss& loss, const SgdDynamics& dyn,
                const Vector& noise_draw);

struct StabilityReport {
    bool stable;
    /// rho(I - lr A); the chain is stationary iff rho < 1.
    double spectral_radius;
};

StabilityReport stability_check(const QuadraticLoss& loss, const SgdDynamics& dyn);

/// Iterates sgd_step `total_steps` times. Throws UnstableDynamicsError unless
/// the dynamics pass stability_check or `allow_unstable` is set.
Trajectory simulate_chain(const Vector& init, const QuadraticLoss& loss, const SgdDynamics& dyn,
                          std::int64_t total_steps, std::int64_t stride, std::uint64_t seed,
                          bool allow_unstable = false);

/// Half the records, the default burn-in.
Eigen::Index default_burn_in(const Trajectory& traj);

MomentEstimate estimate_stationary(const Trajectory& traj, Eigen::Index burn_in_records);

/// Exact stationary covariance of the discrete chain: X = M X M^T + (lr^2/|S|) C
/// with M = I - lr A.
SymmetricMatrix discrete_stationary_covariance(const QuadraticLoss& loss, const SgdDynamics& dyn);

/// Continuous-time OU covariance: A X + X A = (lr/|S|) C.
SymmetricMatrix continuous_stationary_covariance(const QuadraticLoss& loss, const SgdDynamics& dyn);

/// Pools moment estimates as if all samples had been concatenated in order.
MomentEstimate pool_moments(const std::vector<MomentEstimate>& parts);

enum class InitMode { analytic_sample, chain_continue };

struct StageSpec {
    QuadraticLoss loss;
    SgdDynamics dynamics;
    std::int64_t steps;
};

struct TwoStageConfig {
    StageSpec pretrain;
    StageSpec finetune;
    std::int64_t replicas = 4;
    std::int64_t stride = 10;
    /// Burn-in in records per stage; defaults to half of each stage's records.
    std::optional<Eigen::Index> burn_in{};
    std::uint64_t master_seed = 0;
    InitMode init_mode = InitMode::chain_continue;
    /// Pre-training start; zero vector when unset.
    std::optional<Vector> pretrain_init{};
    /// Worker threads; 0 picks the hardware concurrency. Results do not depend on it.
    unsigned workers = 0;
};

struct TwoStageResult {
    MomentEstimate pt_estimate;
    MomentEstimate ft_estimate;
};

/// Runs `replicas` independent pre-train -> fine-tune chains. Replica r uses
/// seed derive_seed(master_seed, r); pooling is ordered by replica index.
TwoStageResult two_stage_run(const TwoStageConfig& config);

/// CSV with header `step,theta_0,...,theta_{d-1}`.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

}  // namespace diffpac
