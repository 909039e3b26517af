#include <gtest/gtest.h>

#include "diffpac/bounds.hpp"
#include "diffpac/error.hpp"
#include "oracles.hpp"

using namespace diffpac;

namespace {

SpdMatrix diag(double a, double b) {
    Matrix m = Matrix::Zero(2, 2);
    m.diagonal() << a, b;
    return SpdMatrix(m, Strictness::strict);
}

}  // namespace

// Reference values below were computed with 50-digit arithmetic.

TEST(McAllester, ReferenceValues) {
    EXPECT_NEAR(mcallester_bound(10.0, SampleSpec(100, 0.05)), 0.31384231276889843, 1e-14);
    EXPECT_NEAR(mcallester_bound(0.0, SampleSpec(100, 0.05)), 0.21964913157744110, 1e-14);
}

TEST(McAllester, DeltaOneDropsConfidenceTerm) {
    EXPECT_NEAR(mcallester_bound(0.0, SampleSpec(100, 1.0)), std::sqrt((std::log(100.0) + 2.0) / 199.0), 1e-15);
}

TEST(McAllester, RejectsNegativeKl) {
    EXPECT_THROW(mcallester_bound(-0.1, SampleSpec(100, 0.05)), InvalidSpecError);
}

TEST(SampleSpec, Validation) {
    EXPECT_THROW(SampleSpec(0, 0.05), InvalidSpecError);
    EXPECT_THROW(SampleSpec(10, 0.0), InvalidSpecError);
    EXPECT_THROW(SampleSpec(10, 1.5), InvalidSpecError);
    EXPECT_NO_THROW(SampleSpec(1, 1.0));
}

TEST(StageComplexity, EqualsMcAllesterAtHalfDiscrepancy) {
    const SampleSpec spec(1000, 0.05);
    for (double d : {0.0, 0.5, 3.0, 40.0}) {
        EXPECT_NEAR(stage_complexity(d, spec), mcallester_bound(0.5 * d, spec), 1e-15);
    }
}

TEST(PretrainBound, DiagonalReference) {
    const BoundReport r = pretrain_bound(diag(0.05, 0.025), SampleSpec(1000, 0.05));
    EXPECT_NEAR(r.kl_term, 4.7596117276679273, 1e-13);
    EXPECT_NEAR(r.paper_literal_kl, -8.6096117276679273, 1e-13);
    EXPECT_NEAR(r.complexity_term, stage_complexity(r.kl_term, SampleSpec(1000, 0.05)), 1e-15);
}

TEST(Discrepancy, IdenticalDomainsIsZero) {
    const SpdMatrix s(oracle::random_spd(3, 0.2, 2.0, 4), Strictness::strict);
    const DomainPair pair(s, s, Vector::Zero(3));
    EXPECT_NEAR(discrepancy_d(pair), 0.0, 1e-12);
    const BoundReport r = finetune_bound(pair, SampleSpec(1000, 0.05));
    EXPECT_NEAR(r.complexity_term, 0.077166839619337024, 1e-14);
}

TEST(Discrepancy, UnitShiftReference) {
    // shift (1, 1) / sqrt(2) under identity covariances: D = 1.
    const DomainPair pair(SpdMatrix::identity(2), SpdMatrix::identity(2), Vector::Constant(2, std::sqrt(0.5)));
    EXPECT_NEAR(discrepancy_d(pair), 1.0, 1e-14);
    EXPECT_NEAR(finetune_bound(pair, SampleSpec(1000, 0.05)).complexity_term, 0.078770846125757389, 1e-14);
}

TEST(Discrepancy, TildeIdentityDim2) {
    const DomainPair pair(SpdMatrix::identity(2), SpdMatrix::identity(2), Vector::Zero(2));
    EXPECT_NEAR(discrepancy_d_tilde(pair), 3.0 * std::log(2.0), 1e-14);
    EXPECT_NEAR(finetune_bound_dimension(pair, SampleSpec(1000, 0.05)).complexity_term,
                0.080466400332556586, 1e-14);
}

TEST(Discrepancy, TwiceKlOracle) {
    for (std::uint64_t s = 0; s < 100; ++s) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(s % 10);
        const Matrix spt = oracle::random_spd(n, 0.1, 10.0, s);
        const Matrix sft = oracle::random_spd(n, 0.1, 10.0, s + 300);
        const Vector shift = oracle::random_vector(n, 1.0, s);
        const DomainPair pair(SpdMatrix(spt, Strictness::strict), SpdMatrix(sft, Strictness::strict), shift);
        const double kl = oracle::gaussian_kl_eigen(shift, sft, Vector::Zero(n), spt);
        EXPECT_NEAR(discrepancy_d(pair), 2.0 * kl, 1e-9 * (1.0 + kl));
    }
}

TEST(Discrepancy, LiteralSignDiffersByTwoLogDet) {
    const DomainPair pair(diag(1.0, 2.0), diag(0.5, 0.5), Vector::Zero(2));
    const double gap = discrepancy_d(pair, LogDetSign::paper_literal) - discrepancy_d(pair);
    // M = diag(0.5, 0.25), so the two variants differ by 2 ln det M.
    EXPECT_NEAR(gap, 2.0 * std::log(0.125), 1e-14);
}

TEST(Lemma2, CheckFields) {
    const DomainPair pair(SpdMatrix::identity(3), SpdMatrix::identity(3), Vector::Zero(3));
    const Lemma2Result r = lemma2_check(pair);
    EXPECT_TRUE(r.holds);
    EXPECT_NEAR(r.margin, r.d_tilde_value - r.d_value, 1e-15);
}

TEST(Lemma2, SurveyShapeAndDeterminism) {
    Lemma2SurveyOptions options;
    options.pairs = 100;
    const auto rows = lemma2_survey(options);
    const auto again = lemma2_survey(options);
    ASSERT_EQ(rows.size(), 10u);
    std::int64_t total = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i].dim, static_cast<Eigen::Index>(i + 1));
        EXPECT_EQ(rows[i].holds_count, again[i].holds_count);
        EXPECT_EQ(rows[i].min_margin, again[i].min_margin);
        EXPECT_GE(rows[i].holds_fraction, 0.0);
        EXPECT_LE(rows[i].holds_fraction, 1.0);
        total += rows[i].trials;
    }
    EXPECT_EQ(total, 100);
}

TEST(KlUpperBoundTrace, EqualsExactKlAtLyapunovSolution) {
    const Matrix a = oracle::random_spd(3, 0.5, 2.0, 12);
    const Matrix c = oracle::random_spd(3, 0.5, 2.0, 13);
    const Matrix sigma = 0.1 / 2.0 * oracle::lyapunov_kron(a, c);
    const double exact = oracle::gaussian_kl_eigen(Vector::Zero(3), sigma, Vector::Zero(3), Matrix::Identity(3, 3));
    const double bound = kl_upper_bound_trace(SpdMatrix(a, Strictness::strict), SpdMatrix(c, Strictness::strict),
                                              0.1, 2, SpdMatrix(sigma, Strictness::strict));
    EXPECT_NEAR(bound, exact, 1e-10 * (1.0 + exact));
}

TEST(Dominance, ReferenceRatio) {
    const DominanceReport r = dominance_from_terms(1.0, SampleSpec(1000000, 0.05), 1.0, SampleSpec(1000, 0.05));
    EXPECT_NEAR(r.pt_term, 0.0031073503573900794, 1e-15);
    EXPECT_NEAR(r.ft_term, 0.078770846125757389, 1e-14);
    EXPECT_NEAR(r.ratio, 25.349843778774424, 1e-10);
}

TEST(BoundReport, JsonKeys) {
    const std::string text = to_json(pretrain_bound(SpdMatrix::identity(2), SampleSpec(10, 0.5))).dump();
    for (const char* key : {"\"kl_term\"", "\"complexity_term\"", "\"paper_literal_kl\"", "\"notes\""}) {
        EXPECT_NE(text.find(key), std::string::npos) << key;
    }
}
