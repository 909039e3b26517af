#include "diffpac/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "diffpac/error.hpp"
#include "diffpac/random.hpp"

namespace diffpac {

namespace {

constexpr double kLemma2Slack = 1e-12;
constexpr double kNegativeClamp = 1e-12;

void require_same_dim(Eigen::Index a, Eigen::Index b, const char* operation) {
    if (a != b) {
        throw DimensionMismatchError(
            fmt::format("{}: dimensions {} and {} differ", operation, a, b));
    }
}

// Shared pieces of D and D-tilde.
struct PairTerms {
    double trace;         // tr(S_pt^-1 S_ft)
    double log_det;       // log det(S_pt^-1 S_ft)
    double mahalanobis;   // shift^T S_pt^-1 shift
    double dim;
};

PairTerms pair_terms(const DomainPair& pair) {
    const SpdMatrix& pt = pair.sigma_pt();
    return PairTerms{pt.solve(pair.sigma_ft().matrix()).trace(),
                     log_det(pair.sigma_ft()) - log_det(pt),
                     pair.shift().dot(pt.solve(pair.shift())),
                     static_cast<double>(pair.dim())};
}

double clamp_tiny_negative(double value, const char* operation) {
    if (value < 0.0) {
        if (value > -kNegativeClamp) {
            return 0.0;
        }
        throw InternalError(fmt::format("{}: negative value {:.17g}", operation, value));
    }
    return value;
}

}  // namespace

DomainPair::DomainPair(SpdMatrix sigma_pt, SpdMatrix sigma_ft, Vector shift)
    : sigma_pt_(std::move(sigma_pt)), sigma_ft_(std::move(sigma_ft)), shift_(std::move(shift)) {
    require_same_dim(sigma_pt_.dim(), sigma_ft_.dim(), "DomainPair");
    require_same_dim(sigma_pt_.dim(), shift_.size(), "DomainPair");
    if (!sigma_pt_.is_strict() || !sigma_ft_.is_strict()) {
        throw NotPositiveDefiniteError("DomainPair: covariances must be strictly positive definite",
                                       std::min(sigma_pt_.min_eigenvalue(), sigma_ft_.min_eigenvalue()));
    }
}

DomainPair DomainPair::from_measures(const GaussianMeasure& q_pt, const GaussianMeasure& q_ft) {
    return DomainPair(q_pt.covariance(), q_ft.covariance(), q_ft.mean() - q_pt.mean());
}

SampleSpec::SampleSpec(std::int64_t n, double d) : sample_size(n), delta(d) {
    if (sample_size < 1) {
        throw InvalidSpecError(fmt::format("SampleSpec: sample size {} < 1", sample_size));
    }
    if (!(delta > 0.0) || !(delta <= 1.0)) {
        throw InvalidSpecError(fmt::format("SampleSpec: delta {} outside (0, 1]", delta));
    }
}

double mcallester_bound(double kl, const SampleSpec& spec) {
    if (!(kl >= 0.0) || !std::isfinite(kl)) {
        throw InvalidSpecError(fmt::format("mcallester_bound: kl must be finite and >= 0, got {}", kl));
    }
    const double n = static_cast<double>(spec.sample_size);
    return std::sqrt((kl + std::log(1.0 / spec.delta) + std::log(n) + 2.0) / (2.0 * n - 1.0));
}

double stage_complexity(double discrepancy, const SampleSpec& spec) {
    if (!(discrepancy >= 0.0) || !std::isfinite(discrepancy)) {
        throw InvalidSpecError(
            fmt::format("stage_complexity: discrepancy must be finite and >= 0, got {}", discrepancy));
    }
    const double n = static_cast<double>(spec.sample_size);
    return std::sqrt((discrepancy + 2.0 * std::log(1.0 / spec.delta) + 2.0 * std::log(n) + 4.0) /
                     (4.0 * n - 2.0));
}

BoundReport pretrain_bound(const SpdMatrix& sigma_pt, const SampleSpec& spec) {
    const double d = static_cast<double>(sigma_pt.dim());
    const double trace_shift = sigma_pt.trace() - d;
    const double ld = log_det(sigma_pt);
    const double kl_term = clamp_tiny_negative(trace_shift - ld, "pretrain_bound");
    return BoundReport{
        kl_term, stage_complexity(kl_term, spec), ld + trace_shift,
        "kl_term = 2 KL(N(0, Sigma_PT) || N(0, I)) = tr(Sigma_PT - I) - log det Sigma_PT; "
        "paper_literal_kl uses +log det"};
}

double discrepancy_d(const DomainPair& pair, LogDetSign sign) {
    const PairTerms t = pair_terms(pair);
    const double common = t.trace - t.dim + t.mahalanobis;
    if (sign == LogDetSign::paper_literal) {
        return common + t.log_det;
    }
    return clamp_tiny_negative(common - t.log_det, "discrepancy_d");
}

double discrepancy_d_tilde(const DomainPair& pair) {
    const PairTerms t = pair_terms(pair);
    return std::log(t.trace) + t.trace + t.mahalanobis + t.dim * std::log(t.dim) - t.dim;
}

BoundReport finetune_bound(const DomainPair& pair, const SampleSpec& spec) {
    const double kl_term = discrepancy_d(pair);
    return BoundReport{kl_term, stage_complexity(kl_term, spec),
                       discrepancy_d(pair, LogDetSign::paper_literal),
                       "kl_term = D = 2 KL(Q_FT || Q_PT); paper_literal_kl uses +log det"};
}

BoundReport finetune_bound_dimension(const DomainPair& pair, const SampleSpec& spec) {
    const double kl_term = discrepancy_d_tilde(pair);
    if (kl_term < 0.0) {
        throw InvalidSpecError(fmt::format(
            "finetune_bound_dimension: dimension-dependent discrepancy {:.17g} is negative",
            kl_term));
    }
    return BoundReport{kl_term, stage_complexity(kl_term, spec), kl_term,
                       "kl_term = D-tilde, evaluated as printed"};
}

Lemma2Result lemma2_check(const DomainPair& pair) {
    const double d_value = discrepancy_d(pair);
    const double d_literal = discrepancy_d(pair, LogDetSign::paper_literal);
    const double d_tilde = discrepancy_d_tilde(pair);
    return Lemma2Result{d_value,
                        d_tilde,
                        d_value <= d_tilde + kLemma2Slack,
                        d_tilde - d_value,
                        d_literal,
                        d_literal <= d_tilde + kLemma2Slack};
}

std::vector<Lemma2SurveyRow> lemma2_survey(const Lemma2SurveyOptions& options) {
    if (options.pairs < 1 || options.max_dim < 1) {
        throw InvalidRangeError("lemma2_survey: need pairs >= 1 and max_dim >= 1");
    }
    std::vector<Lemma2SurveyRow> rows;
    for (Eigen::Index d = 1; d <= options.max_dim; ++d) {
        rows.push_back(Lemma2SurveyRow{d, 0, 0, 0.0, std::numeric_limits<double>::infinity(), 0});
    }
    for (std::int64_t i = 0; i < options.pairs; ++i) {
        const Eigen::Index dim = 1 + static_cast<Eigen::Index>(i % options.max_dim);
        const std::uint64_t seed = derive_seed(options.seed, static_cast<std::uint64_t>(i));
        Rng rng(derive_seed(seed, 2));
        const DomainPair pair(
            random_spd(dim, options.eigenvalue_low, options.eigenvalue_high, derive_seed(seed, 0)),
            random_spd(dim, options.eigenvalue_low, options.eigenvalue_high, derive_seed(seed, 1)),
            options.shift_scale * standard_normal_vector(rng, dim));
        const Lemma2Result result = lemma2_check(pair);

        Lemma2SurveyRow& row = rows[static_cast<std::size_t>(dim - 1)];
        ++row.trials;
        row.holds_count += result.holds ? 1 : 0;
        row.literal_holds_count += result.literal_holds ? 1 : 0;
        row.min_margin = std::min(row.min_margin, result.margin);
    }
    for (Lemma2SurveyRow& row : rows) {
        row.holds_fraction =
            row.trials > 0 ? static_cast<double>(row.holds_count) / static_cast<double>(row.trials)
                           : std::numeric_limits<double>::quiet_NaN();
    }
    return rows;
}

double kl_upper_bound_trace(const SpdMatrix& hessian, const SpdMatrix& noise_cov, double lr,
                            std::int64_t batch_size, const SpdMatrix& sigma) {
    require_same_dim(hessian.dim(), noise_cov.dim(), "kl_upper_bound_trace");
    require_same_dim(hessian.dim(), sigma.dim(), "kl_upper_bound_trace");
    if (!(lr > 0.0) || batch_size < 1) {
        throw InvalidRangeError("kl_upper_bound_trace: need lr > 0 and batch_size >= 1");
    }
    const double scale = lr / static_cast<double>(batch_size);
    // tr(C A^-1) = tr(A^-1 C).
    const double trace_term = hessian.solve(noise_cov.matrix()).trace();
    const double d = static_cast<double>(hessian.dim());
    return 0.25 * scale * trace_term - 0.5 * log_det(sigma) - 0.5 * d;
}

DominanceReport dominance_report(const SpdMatrix& sigma_pt, const SampleSpec& spec_pt,
                                 const DomainPair& pair, const SampleSpec& spec_ft) {
    const double pt_term = pretrain_bound(sigma_pt, spec_pt).complexity_term;
    const double ft_term = finetune_bound(pair, spec_ft).complexity_term;
    return DominanceReport{pt_term, ft_term, ft_term / pt_term};
}

DominanceReport dominance_from_terms(double d_pt, const SampleSpec& spec_pt, double d_ft,
                                     const SampleSpec& spec_ft) {
    const double pt_term = stage_complexity(d_pt, spec_pt);
    const double ft_term = stage_complexity(d_ft, spec_ft);
    return DominanceReport{pt_term, ft_term, ft_term / pt_term};
}

JsonObject to_json(const BoundReport& report) {
    JsonObject json;
    json.add("kl_term", report.kl_term)
        .add("complexity_term", report.complexity_term)
        .add("paper_literal_kl", report.paper_literal_kl)
        .add("notes", report.notes);
    return json;
}

}  // namespace diffpac
