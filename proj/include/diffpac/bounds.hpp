#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffpac/gaussian.hpp"
#include "diffpac/linalg.hpp"
#include "diffpac/serialize.hpp"

namespace diffpac {

/// Pre-training and fine-tuning stationary covariances plus the shift of the
/// fine-tuned centre relative to the pre-trained one.
class DomainPair {
public:
    DomainPair(SpdMatrix sigma_pt, SpdMatrix sigma_ft, Vector shift);

    /// Pair built from the two stationary measures; shift = mean_ft - mean_pt.
    static DomainPair from_measures(const GaussianMeasure& q_pt, const GaussianMeasure& q_ft);

    Eigen::Index dim() const noexcept { return shift_.size(); }
    const SpdMatrix& sigma_pt() const noexcept { return sigma_pt_; }
    const SpdMatrix& sigma_ft() const noexcept { return sigma_ft_; }
    const Vector& shift() const noexcept { return shift_; }

private:
    SpdMatrix sigma_pt_;
    SpdMatrix sigma_ft_;
    Vector shift_;
};

/// Sample size N and confidence parameter delta. delta = 1 is accepted so the
/// degenerate "all log terms vanish" evaluation is expressible.
struct SampleSpec {
    SampleSpec(std::int64_t sample_size, double delta);

    std::int64_t sample_size;
    double delta;
};

struct BoundReport {
    /// Discrepancy / divergence value fed into the bound (canonical sign).
    double kl_term;
    /// The square-root addend.
    double complexity_term;
    /// Same quantity with +log det in place of -log det; can be negative.
    double paper_literal_kl;
    std::string notes;
};

enum class LogDetSign { canonical, paper_literal };

/// sqrt((kl + log(1/delta) + log N + 2) / (2N - 1)), natural logs.
double mcallester_bound(double kl, const SampleSpec& spec);

/// sqrt((D + 2 log(1/delta) + 2 log N + 4) / (4N - 2)), the stage-bound shape
/// where D = 2 KL. Algebraically mcallester_bound(D / 2, spec).
double stage_complexity(double discrepancy, const SampleSpec& spec);

BoundReport pretrain_bound(const SpdMatrix& sigma_pt, const SampleSpec& spec);

/// tr(S_pt^-1 S_ft - I) + shift^T S_pt^-1 shift -/+ log det(S_pt^-1 S_ft).
/// The canonical sign equals 2 KL(N(shift, S_ft) || N(0, S_pt)).
double discrepancy_d(const DomainPair& pair, LogDetSign sign = LogDetSign::canonical);

/// log tr(S_pt^-1 S_ft) + tr(S_pt^-1 S_ft) + shift^T S_pt^-1 shift + d log d - d.
double discrepancy_d_tilde(const DomainPair& pair);

BoundReport finetune_bound(const DomainPair& pair, const SampleSpec& spec);
BoundReport finetune_bound_dimension(const DomainPair& pair, const SampleSpec& spec);

struct Lemma2Result {
    double d_value;
    double d_tilde_value;
    bool holds;
    double margin;
    /// D with the printed +log det sign, and whether it is below D-tilde.
    double d_literal_value;
    bool literal_holds;
};

/// Compares D against D-tilde on one pair; holds = D <= D-tilde + 1e-12.
Lemma2Result lemma2_check(const DomainPair& pair);

struct Lemma2SurveyRow {
    Eigen::Index dim;
    std::int64_t trials;
    std::int64_t holds_count;
    double holds_fraction;
    double min_margin;
    std::int64_t literal_holds_count;
};

struct Lemma2SurveyOptions {
    std::int64_t pairs = 1000;
    Eigen::Index max_dim = 10;
    double eigenvalue_low = 0.1;
    double eigenvalue_high = 10.0;
    double shift_scale = 1.0;
    std::uint64_t seed = 0;
};

/// Pair i has dimension 1 + (i mod max_dim) and is drawn from seed
/// derive_seed(seed, i). One row per dimension, ascending.
std::vector<Lemma2SurveyRow> lemma2_survey(const Lemma2SurveyOptions& options);

/// 1/4 (lr/|S|) tr(C A^-1) - 1/2 log det(Sigma) - d/2, the trace-form upper
/// expression for KL(N(0, Sigma) || N(0, I)).
double kl_upper_bound_trace(const SpdMatrix& hessian, const SpdMatrix& noise_cov, double lr,
                            std::int64_t batch_size, const SpdMatrix& sigma);

struct DominanceReport {
    double pt_term;
    double ft_term;
    double ratio;
};

DominanceReport dominance_report(const SpdMatrix& sigma_pt, const SampleSpec& spec_pt,
                                 const DomainPair& pair, const SampleSpec& spec_ft);

/// Same comparison from precomputed discrepancy values.
DominanceReport dominance_from_terms(double d_pt, const SampleSpec& spec_pt, double d_ft,
                                     const SampleSpec& spec_ft);

JsonObject to_json(const BoundReport& report);

}  // namespace diffpac
