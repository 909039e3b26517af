#include "diffpac/sgd.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "diffpac/error.hpp"
#include "diffpac/random.hpp"
#include "diffpac/serialize.hpp"

namespace diffpac {

namespace {

void require_same_dim(Eigen::Index a, Eigen::Index b, const char* operation) {
    if (a != b) {
        throw DimensionMismatchError(
            fmt::format("{}: dimensions {} and {} differ", operation, a, b));
    }
}

void require_stable(const QuadraticLoss& loss, const SgdDynamics& dyn, const char* stage) {
    const StabilityReport report = stability_check(loss, dyn);
    if (!report.stable) {
        throw UnstableDynamicsError(fmt::format(
            "stability_check failed{}: spectral radius of I - lr*A is {:.17g} (must be < 1)",
            stage, report.spectral_radius));
    }
}

struct ReplicaResult {
    MomentEstimate pt;
    MomentEstimate ft;
};

}  // namespace

QuadraticLoss::QuadraticLoss(SpdMatrix hessian, Vector minimizer, double offset)
    : hessian_(std::move(hessian)), minimizer_(std::move(minimizer)), offset_(offset) {
    require_same_dim(hessian_.dim(), minimizer_.size(), "QuadraticLoss");
    if (!minimizer_.allFinite() || !std::isfinite(offset_)) {
        throw InvalidRangeError("QuadraticLoss: non-finite minimizer or offset");
    }
}

double QuadraticLoss::value(const Vector& theta) const {
    require_same_dim(theta.size(), dim(), "QuadraticLoss::value");
    const Vector diff = theta - minimizer_;
    return offset_ + 0.5 * diff.dot(hessian_.matrix() * diff);
}

Vector QuadraticLoss::gradient(const Vector& theta) const {
    require_same_dim(theta.size(), dim(), "QuadraticLoss::gradient");
    return hessian_.matrix() * (theta - minimizer_);
}

SgdDynamics::SgdDynamics(double lr, std::int64_t batch_size, Matrix noise_factor)
    : lr_(lr),
      batch_size_(batch_size),
      noise_factor_(std::move(noise_factor)),
      noise_cov_(Matrix(noise_factor_.transpose() * noise_factor_), Strictness::semidefinite) {
    if (!(lr_ > 0.0) || !std::isfinite(lr_)) {
        throw InvalidRangeError(fmt::format("SgdDynamics: lr must be positive, got {}", lr_));
    }
    if (batch_size_ < 1) {
        throw InvalidRangeError(
            fmt::format("SgdDynamics: batch_size must be >= 1, got {}", batch_size_));
    }
    if (noise_factor_.rows() != noise_factor_.cols()) {
        throw NotSquareError("SgdDynamics: noise factor B must be square");
    }
}

SgdDynamics SgdDynamics::from_noise_cov(double lr, std::int64_t batch_size,
                                        const SpdMatrix& noise_cov) {
    return SgdDynamics(lr, batch_size, symmetric_factor(noise_cov));
}

Vector sgd_step(const Vector& state, const QuadraticLoss& loss, const SgdDynamics& dyn,
                const Vector& noise_draw) {
    require_same_dim(state.size(), loss.dim(), "sgd_step");
    require_same_dim(dyn.dim(), loss.dim(), "sgd_step");
    require_same_dim(noise_draw.size(), loss.dim(), "sgd_step");
    const double noise_scale = dyn.lr() / std::sqrt(static_cast<double>(dyn.batch_size()));
    return state - dyn.lr() * (loss.hessian().matrix() * (state - loss.minimizer())) +
           noise_scale * (dyn.noise_factor().transpose() * noise_draw);
}

StabilityReport stability_check(const QuadraticLoss& loss, const SgdDynamics& dyn) {
    require_same_dim(dyn.dim(), loss.dim(), "stability_check");
    // A is symmetric, so the eigenvalues of I - lr A are 1 - lr lambda_i.
    const Vector& lambda = loss.hessian().eigenvalues();
    const double rho = (1.0 - dyn.lr() * lambda.array()).abs().maxCoeff();
    return StabilityReport{rho < 1.0, rho};
}

Trajectory simulate_chain(const Vector& init, const QuadraticLoss& loss, const SgdDynamics& dyn,
                          std::int64_t total_steps, std::int64_t stride, std::uint64_t seed,
                          bool allow_unstable) {
    require_same_dim(init.size(), loss.dim(), "simulate_chain");
    require_same_dim(dyn.dim(), loss.dim(), "simulate_chain");
    if (total_steps < 1 || stride < 1) {
        throw InvalidRangeError(fmt::format(
            "simulate_chain: need total_steps >= 1 and stride >= 1, got {} and {}", total_steps,
            stride));
    }
    if (!allow_unstable) {
        require_stable(loss, dyn, " in simulate_chain");
    }

    const Eigen::Index d = loss.dim();
    const Eigen::Index records = static_cast<Eigen::Index>(total_steps / stride) + 1;
    Trajectory traj{Matrix(records, d), Vector(), stride, total_steps, seed};

    const Matrix& a = loss.hessian().matrix();
    const Vector& center = loss.minimizer();
    const Matrix noise_map = (dyn.lr() / std::sqrt(static_cast<double>(dyn.batch_size()))) *
                             dyn.noise_factor().transpose();
    const double lr = dyn.lr();

    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector state = init;
    Vector z(d);
    Vector drift(d);
    traj.states.row(0) = state.transpose();
    Eigen::Index next_record = 1;
    for (std::int64_t step = 1; step <= total_steps; ++step) {
        for (Eigen::Index i = 0; i < d; ++i) {
            z(i) = normal(rng);
        }
        drift.noalias() = a * (state - center);
        state -= lr * drift;
        state.noalias() += noise_map * z;
        if (step % stride == 0) {
            traj.states.row(next_record++) = state.transpose();
        }
    }
    traj.final_state = state;
    return traj;
}

Eigen::Index default_burn_in(const Trajectory& traj) {
    return traj.record_count() / 2;
}

MomentEstimate estimate_stationary(const Trajectory& traj, Eigen::Index burn_in_records) {
    if (burn_in_records < 0) {
        throw InvalidRangeError("estimate_stationary: negative burn-in");
    }
    const Eigen::Index kept = traj.record_count() - burn_in_records;
    if (kept < 2) {
        throw TooFewSamplesError(fmt::format(
            "estimate_stationary: {} records after burn-in of {}, need at least 2",
            std::max<Eigen::Index>(kept, 0), burn_in_records));
    }
    return empirical_moments(traj.states.bottomRows(kept));
}

SymmetricMatrix discrete_stationary_covariance(const QuadraticLoss& loss, const SgdDynamics& dyn) {
    require_same_dim(dyn.dim(), loss.dim(), "discrete_stationary_covariance");
    const Eigen::Index d = loss.dim();
    const Matrix m = Matrix::Identity(d, d) - dyn.lr() * loss.hessian().matrix();
    const double scale = dyn.lr() * dyn.lr() / static_cast<double>(dyn.batch_size());
    return solve_discrete_stein(m, SymmetricMatrix(scale * dyn.noise_cov().matrix()));
}

SymmetricMatrix continuous_stationary_covariance(const QuadraticLoss& loss,
                                                 const SgdDynamics& dyn) {
    require_same_dim(dyn.dim(), loss.dim(), "continuous_stationary_covariance");
    const double scale = dyn.lr() / static_cast<double>(dyn.batch_size());
    return solve_continuous_lyapunov(loss.hessian(),
                                     SymmetricMatrix(scale * dyn.noise_cov().matrix()));
}

MomentEstimate pool_moments(const std::vector<MomentEstimate>& parts) {
    if (parts.empty()) {
        throw TooFewSamplesError("pool_moments: nothing to pool");
    }
    const Eigen::Index d = parts.front().mean.size();
    Eigen::Index total = 0;
    Vector weighted = Vector::Zero(d);
    for (const MomentEstimate& part : parts) {
        require_same_dim(part.mean.size(), d, "pool_moments");
        total += part.sample_count;
        weighted += static_cast<double>(part.sample_count) * part.mean;
    }
    const Vector mean = weighted / static_cast<double>(total);
    Matrix scatter = Matrix::Zero(d, d);
    for (const MomentEstimate& part : parts) {
        const Vector shift = part.mean - mean;
        const double n = static_cast<double>(part.sample_count);
        scatter += (n - 1.0) * part.covariance.matrix() + n * shift * shift.transpose();
    }
    if (total < 2) {
        throw TooFewSamplesError("pool_moments: fewer than 2 samples in total");
    }
    return MomentEstimate{mean, SymmetricMatrix(scatter / static_cast<double>(total - 1)), total};
}

TwoStageResult two_stage_run(const TwoStageConfig& config) {
    const StageSpec& pt = config.pretrain;
    const StageSpec& ft = config.finetune;
    require_same_dim(pt.loss.dim(), ft.loss.dim(), "two_stage_run");
    require_same_dim(pt.dynamics.dim(), pt.loss.dim(), "two_stage_run");
    require_same_dim(ft.dynamics.dim(), ft.loss.dim(), "two_stage_run");
    if (config.replicas < 2) {
        throw InvalidRangeError(
            fmt::format("two_stage_run: need at least 2 replicas, got {}", config.replicas));
    }
    if (pt.steps < 1 || ft.steps < 1 || config.stride < 1) {
        throw InvalidRangeError("two_stage_run: steps and stride must be positive");
    }
    require_stable(pt.loss, pt.dynamics, " for the pre-training stage");
    require_stable(ft.loss, ft.dynamics, " for the fine-tuning stage");

    const Eigen::Index d = pt.loss.dim();
    const Vector pt_init = config.pretrain_init.value_or(Vector::Zero(d));
    require_same_dim(pt_init.size(), d, "two_stage_run");

    std::optional<GaussianMeasure> pt_stationary;
    if (config.init_mode == InitMode::analytic_sample) {
        pt_stationary = stationary_from_dynamics(pt.loss.hessian(), pt.loss.minimizer(),
                                                 pt.dynamics.noise_cov(), pt.dynamics.lr(),
                                                 pt.dynamics.batch_size());
    }

    auto burn_in_for = [&](const Trajectory& traj) {
        return config.burn_in.value_or(default_burn_in(traj));
    };

    auto run_replica = [&](std::int64_t r) {
        const std::uint64_t replica_seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(r));
        const Trajectory pt_traj = simulate_chain(pt_init, pt.loss, pt.dynamics, pt.steps,
                                                  config.stride, derive_seed(replica_seed, 0));
        Vector ft_init;
        if (config.init_mode == InitMode::analytic_sample) {
            ft_init = sample(*pt_stationary, 1, derive_seed(replica_seed, 1)).row(0).transpose();
        } else {
            ft_init = pt_traj.final_state;
        }
        const Trajectory ft_traj = simulate_chain(ft_init, ft.loss, ft.dynamics, ft.steps,
                                                  config.stride, derive_seed(replica_seed, 2));
        return ReplicaResult{estimate_stationary(pt_traj, burn_in_for(pt_traj)),
                             estimate_stationary(ft_traj, burn_in_for(ft_traj))};
    };

    const auto replicas = static_cast<std::size_t>(config.replicas);
    std::vector<std::optional<ReplicaResult>> results(replicas);
    std::vector<std::exception_ptr> errors(replicas);
    unsigned workers = config.workers != 0 ? config.workers : std::thread::hardware_concurrency();
    workers = std::clamp<unsigned>(workers, 1, static_cast<unsigned>(replicas));

    auto worker = [&](unsigned w) {
        for (std::size_t r = w; r < replicas; r += workers) {
            try {
                results[r] = run_replica(static_cast<std::int64_t>(r));
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        worker(0);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            threads.emplace_back(worker, w);
        }
        for (std::thread& t : threads) {
            t.join();
        }
    }
    for (const std::exception_ptr& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    std::vector<MomentEstimate> pt_parts;
    std::vector<MomentEstimate> ft_parts;
    pt_parts.reserve(replicas);
    ft_parts.reserve(replicas);
    for (const auto& result : results) {
        pt_parts.push_back(result->pt);
        ft_parts.push_back(result->ft);
    }
    return TwoStageResult{pool_moments(pt_parts), pool_moments(ft_parts)};
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    out << "step";
    for (Eigen::Index j = 0; j < traj.states.cols(); ++j) {
        out << ",theta_" << j;
    }
    out << '\n';
    for (Eigen::Index i = 0; i < traj.record_count(); ++i) {
        out << static_cast<std::int64_t>(i) * traj.stride;
        for (Eigen::Index j = 0; j < traj.states.cols(); ++j) {
            out << ',' << format_real(traj.states(i, j));
        }
        out << '\n';
    }
}

}  // namespace diffpac
