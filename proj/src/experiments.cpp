#include "diffpac/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>

#include <fmt/format.h>

#include "diffpac/error.hpp"
#include "diffpac/random.hpp"

namespace diffpac {

const char* const kUnboundedLossNote =
    "McAllester's bound assumes a bounded loss; the squared loss here is unbounded, "
    "so violation counts are an empirical check rather than a guarantee";

namespace {

void require_same_dim(Eigen::Index a, Eigen::Index b, const char* operation) {
    if (a != b) {
        throw DimensionMismatchError(
            fmt::format("{}: dimensions {} and {} differ", operation, a, b));
    }
}

JsonObject stats_json(const SummaryStats& s) {
    JsonObject json;
    json.add("mean", s.mean).add("std", s.std_dev).add("min", s.min).add("max", s.max);
    return json;
}

}  // namespace

RegressionTask::RegressionTask(Vector true_weights, SpdMatrix feature_cov, double noise_std,
                               std::int64_t sample_size)
    : true_weights_(std::move(true_weights)),
      feature_cov_(std::move(feature_cov)),
      noise_std_(noise_std),
      sample_size_(sample_size) {
    require_same_dim(true_weights_.size(), feature_cov_.dim(), "RegressionTask");
    if (!feature_cov_.is_strict()) {
        throw NotPositiveDefiniteError("RegressionTask: feature covariance must be strict",
                                       feature_cov_.min_eigenvalue());
    }
    if (!(noise_std_ >= 0.0) || !std::isfinite(noise_std_)) {
        throw InvalidRangeError(fmt::format("RegressionTask: noise_std {} < 0", noise_std_));
    }
    if (sample_size_ < 1) {
        throw InvalidRangeError(fmt::format("RegressionTask: sample size {} < 1", sample_size_));
    }
}

RegressionTask RegressionTask::with_sample_size(std::int64_t n) const {
    return RegressionTask(true_weights_, feature_cov_, noise_std_, n);
}

Dataset generate_dataset(const RegressionTask& task, std::uint64_t seed) {
    const auto n = static_cast<Eigen::Index>(task.sample_size());
    Rng rng(seed);
    Matrix features(n, task.dim());
    fill_standard_normal(rng, features);
    features = features * task.feature_cov().cholesky_lower().transpose();
    Vector targets = features * task.true_weights();
    if (task.noise_std() > 0.0) {
        targets += task.noise_std() * standard_normal_vector(rng, n);
    }
    return Dataset{std::move(features), std::move(targets), seed};
}

double empirical_risk_direct(const Dataset& data, const Vector& theta) {
    require_same_dim(data.features.cols(), theta.size(), "empirical_risk_direct");
    const Vector residual = data.targets - data.features * theta;
    return 0.5 * residual.squaredNorm() / static_cast<double>(data.features.rows());
}

QuadraticLoss empirical_quadratic(const Dataset& data) {
    require_same_dim(data.features.rows(), data.targets.size(), "empirical_quadratic");
    const double n = static_cast<double>(data.features.rows());
    const Matrix gram = data.features.transpose() * data.features / n;
    std::optional<SpdMatrix> hessian;
    try {
        hessian.emplace(gram, Strictness::strict);
    } catch (const NotPositiveDefiniteError& e) {
        throw SingularDesignError(
            fmt::format("empirical_quadratic: (1/N) X^T X is not positive definite ({})", e.what()));
    }
    const Vector moment = data.features.transpose() * data.targets / n;
    Vector minimizer = hessian->solve(moment);
    const double offset = empirical_risk_direct(data, minimizer);
    return QuadraticLoss(std::move(*hessian), std::move(minimizer), offset);
}

double expected_risk_gaussian(const QuadraticLoss& loss, const Vector& mean,
                              const SpdMatrix& covariance) {
    require_same_dim(loss.dim(), mean.size(), "expected_risk_gaussian");
    require_same_dim(loss.dim(), covariance.dim(), "expected_risk_gaussian");
    const Vector diff = mean - loss.minimizer();
    const Matrix& a = loss.hessian().matrix();
    return loss.offset() + 0.5 * diff.dot(a * diff) +
           0.5 * (a.cwiseProduct(covariance.matrix())).sum();
}

double expected_risk_gaussian(const QuadraticLoss& loss, const GaussianMeasure& q) {
    return expected_risk_gaussian(loss, q.mean(), q.covariance());
}

QuadraticLoss population_quadratic(const RegressionTask& task) {
    return QuadraticLoss(task.feature_cov(), task.true_weights(),
                         0.5 * task.noise_std() * task.noise_std());
}

GapTrial gap_trial(const RegressionTask& task, const SgdDynamics& sgd, const SampleSpec& spec,
                   const GaussianMeasure& prior, std::int64_t steps, std::uint64_t seed,
                   PosteriorMode mode) {
    require_same_dim(task.dim(), sgd.dim(), "gap_trial");
    require_same_dim(task.dim(), prior.dim(), "gap_trial");
    if (spec.sample_size != task.sample_size()) {
        throw InvalidSpecError(fmt::format("gap_trial: bound sample size {} differs from task {}",
                                           spec.sample_size, task.sample_size()));
    }
    const Dataset data = generate_dataset(task, derive_seed(seed, 0));
    const QuadraticLoss empirical = empirical_quadratic(data);
    const StabilityReport stability = stability_check(empirical, sgd);
    if (!stability.stable) {
        throw UnstableDynamicsError(fmt::format(
            "stability_check failed in gap_trial: spectral radius {:.17g} on the empirical Hessian",
            stability.spectral_radius));
    }

    std::optional<GaussianMeasure> posterior;
    if (mode == PosteriorMode::analytic) {
        posterior = stationary_from_dynamics(empirical.hessian(), empirical.minimizer(),
                                             sgd.noise_cov(), sgd.lr(), sgd.batch_size());
    } else {
        if (steps < 1) {
            throw InvalidRangeError("gap_trial: simulated posterior needs steps >= 1");
        }
        const Trajectory traj =
            simulate_chain(empirical.minimizer(), empirical, sgd, steps, 1, derive_seed(seed, 1));
        const MomentEstimate moments = estimate_stationary(traj, default_burn_in(traj));
        posterior.emplace(moments.mean, SpdMatrix(moments.covariance, Strictness::strict));
    }

    const double expected = expected_risk_gaussian(population_quadratic(task), *posterior);
    const double empirical_risk = expected_risk_gaussian(empirical, *posterior);
    const double kl = kl_divergence(*posterior, prior);
    const double bound = mcallester_bound(kl, spec);
    const double gap = expected - empirical_risk;
    return GapTrial{expected, empirical_risk, gap, bound, gap > bound, kl, seed, task.sample_size()};
}

SummaryStats summarize(const std::vector<double>& values) {
    if (values.empty()) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        return SummaryStats{nan, nan, nan, nan};
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return SummaryStats{mean, sd, *lo, *hi};
}

ValidityResult bound_validity_experiment(const RegressionTask& task, const SgdDynamics& sgd,
                                         const SampleSpec& spec, const GaussianMeasure& prior,
                                         std::int64_t trials, std::uint64_t master_seed,
                                         PosteriorMode mode, std::int64_t steps) {
    if (trials < 10) {
        throw InvalidRangeError(
            fmt::format("bound_validity_experiment: need at least 10 trials, got {}", trials));
    }
    ValidityResult result{0, {}, {}, {}, kUnboundedLossNote};
    result.trials.reserve(static_cast<std::size_t>(trials));
    std::vector<double> gaps;
    std::vector<double> bounds;
    for (std::int64_t t = 0; t < trials; ++t) {
        GapTrial trial = gap_trial(task, sgd, spec, prior, steps,
                                   derive_seed(master_seed, static_cast<std::uint64_t>(t)), mode);
        result.violation_count += trial.violated ? 1 : 0;
        gaps.push_back(trial.gap);
        bounds.push_back(trial.bound_value);
        result.trials.push_back(trial);
    }
    result.gaps = summarize(gaps);
    result.bounds = summarize(bounds);
    return result;
}

std::vector<ScalingRow> scaling_experiment(const RegressionTask& task_template,
                                           const std::vector<std::int64_t>& sample_sizes,
                                           const SgdDynamics& sgd, double delta,
                                           std::uint64_t master_seed, std::int64_t trials_per_n) {
    if (sample_sizes.empty() || trials_per_n < 1) {
        throw InvalidRangeError("scaling_experiment: need a non-empty grid and trials_per_n >= 1");
    }
    for (std::size_t i = 0; i < sample_sizes.size(); ++i) {
        if (sample_sizes[i] < task_template.dim() || (i > 0 && sample_sizes[i] <= sample_sizes[i - 1])) {
            throw InvalidRangeError(
                "scaling_experiment: sample sizes must be strictly increasing and >= dimension");
        }
    }
    const GaussianMeasure prior = GaussianMeasure::standard(task_template.dim());
    std::vector<ScalingRow> rows;
    for (std::int64_t n : sample_sizes) {
        const RegressionTask task = task_template.with_sample_size(n);
        const SampleSpec spec(n, delta);
        double bound_sum = 0.0;
        double gap_sum = 0.0;
        for (std::int64_t t = 0; t < trials_per_n; ++t) {
            const GapTrial trial = gap_trial(task, sgd, spec, prior, 0,
                                             derive_seed(master_seed, static_cast<std::uint64_t>(t)));
            bound_sum += trial.bound_value;
            gap_sum += trial.gap;
        }
        const double k = static_cast<double>(trials_per_n);
        rows.push_back(ScalingRow{n, bound_sum / k, gap_sum / k,
                                  std::numeric_limits<double>::quiet_NaN()});
    }
    for (ScalingRow& row : rows) {
        for (const ScalingRow& other : rows) {
            if (other.sample_size == 4 * row.sample_size) {
                row.ratio_4n = other.mean_bound / row.mean_bound;
            }
        }
    }
    return rows;
}

void write_trials_csv(std::ostream& out, const std::vector<GapTrial>& trials) {
    out << "seed,N,gap,bound,violated\n";
    for (const GapTrial& t : trials) {
        out << t.seed << ',' << t.sample_size << ',' << format_real(t.gap) << ','
            << format_real(t.bound_value) << ',' << (t.violated ? 1 : 0) << '\n';
    }
}

JsonObject to_json(const ValidityResult& result, const SampleSpec& spec) {
    JsonObject json;
    json.add("trials", static_cast<std::int64_t>(result.trials.size()))
        .add("sample_size", spec.sample_size)
        .add("delta", spec.delta)
        .add("violation_count", result.violation_count)
        .add("gaps", stats_json(result.gaps))
        .add("bounds", stats_json(result.bounds))
        .add("notes", result.notes);
    return json;
}

void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows) {
    out << "N,mean_bound,mean_gap,ratio_4n\n";
    for (const ScalingRow& row : rows) {
        out << row.sample_size << ',' << format_real(row.mean_bound) << ','
            << format_real(row.mean_gap) << ',' << format_real(row.ratio_4n) << '\n';
    }
}

JsonObject to_json(const std::vector<ScalingRow>& rows) {
    std::vector<JsonObject> items;
    for (const ScalingRow& row : rows) {
        JsonObject item;
        item.add("N", row.sample_size)
            .add("mean_bound", row.mean_bound)
            .add("mean_gap", row.mean_gap)
            .add("ratio_4n", row.ratio_4n);
        items.push_back(std::move(item));
    }
    JsonObject json;
    json.add("rows", std::move(items)).add("notes", kUnboundedLossNote);
    return json;
}

}  // namespace diffpac
