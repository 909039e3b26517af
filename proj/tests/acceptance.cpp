// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "diffpac/bounds.hpp"
#include "diffpac/cli.hpp"
#include "diffpac/experiments.hpp"
#include "diffpac/gaussian.hpp"
#include "diffpac/linalg.hpp"
#include "diffpac/random.hpp"
#include "diffpac/sgd.hpp"
#include "oracles.hpp"

using namespace diffpac;

namespace {

// Pinned tolerances.
constexpr double kSolverRelResidual = 1e-10;
constexpr double kSteinFrobenius = 0.05;
constexpr double kLyapunovFrobenius = 0.10;
constexpr double kTraceRelative = 1e-10;
constexpr double kKlStandardErrors = 3.0;
constexpr double kDiscrepancyTolerance = 1e-10;
constexpr std::int64_t kMaxViolations = 10;
constexpr double kRatioLow = 0.45;
constexpr double kRatioHigh = 0.60;
constexpr double kDominanceMin = 10.0;
constexpr double kDominanceReference = 25.35;
constexpr double kDominanceTolerance = 0.01;
constexpr double kTwoStageFrobenius = 0.05;
constexpr double kTwoStageMean = 0.05;

const std::string kTmp = DIFFPAC_TEST_TMPDIR;
const std::string kExe = DIFFPAC_CLI_PATH;

struct Outcome {
    bool pass;
    std::string detail;
};

std::string write_fixture(const std::string& name, const Matrix& m) {
    const std::string path = kTmp + "/acc_" + name;
    std::ofstream out(path);
    out << m.rows() << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << fmt::format("{:.17g}", m(i, j));
        out << '\n';
    }
    return path;
}

std::string write_text(const std::string& name, const std::string& text) {
    const std::string path = kTmp + "/acc_" + name;
    std::ofstream(path) << text;
    return path;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Eigen::Index dim_for(std::uint64_t i) {
    return 1 + static_cast<Eigen::Index>(i % 10);
}

Outcome criterion1() {
    double worst_lyap = 0.0;
    double worst_stein = 0.0;
    int spd_failures = 0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const Eigen::Index n = dim_for(i);
        const SpdMatrix a = random_spd(n, 0.1, 10.0, derive_seed(1, i));
        const SpdMatrix q = random_spd(n, 0.1, 10.0, derive_seed(2, i));
        const Matrix x = solve_continuous_lyapunov(a, q.symmetric()).matrix();
        const Matrix res = a.matrix() * x + x * a.matrix() - q.matrix();
        worst_lyap = std::max(worst_lyap, res.norm() / q.matrix().norm());
        if (Eigen::SelfAdjointEigenSolver<Matrix>(x).eigenvalues().minCoeff() <= 0.0) ++spd_failures;

        // Non-symmetric M scaled to spectral radius 0.95.
        Rng rng(derive_seed(3, i));
        Matrix m(n, n);
        fill_standard_normal(rng, m);
        m *= 0.95 / spectral_radius(m);
        const Matrix y = solve_discrete_stein(m, q.symmetric()).matrix();
        const Matrix res_s = m * y * m.transpose() + q.matrix() - y;
        worst_stein = std::max(worst_stein, res_s.norm() / q.matrix().norm());
        if (Eigen::SelfAdjointEigenSolver<Matrix>(y).eigenvalues().minCoeff() <= 0.0) ++spd_failures;
    }
    return {worst_lyap <= kSolverRelResidual && worst_stein <= kSolverRelResidual && spd_failures == 0,
            fmt::format("max rel residual Lyapunov {:.3g}, Stein {:.3g}; non-SPD outputs {}", worst_lyap,
                        worst_stein, spd_failures)};
}

Outcome criterion2() {
    bool pass = true;
    std::string detail;
    for (Eigen::Index n = 1; n <= 4; ++n) {
        const QuadraticLoss loss(random_spd(n, 0.5, 1.0, derive_seed(20, n)), Vector::Zero(n));
        const SgdDynamics dyn = SgdDynamics::from_noise_cov(0.1, 1, random_spd(n, 0.5, 2.0, derive_seed(21, n)));
        const Trajectory traj = simulate_chain(Vector::Zero(n), loss, dyn, 1000000, 1, derive_seed(22, n));
        const Matrix emp = estimate_stationary(traj, default_burn_in(traj)).covariance.matrix();
        const double e_stein = oracle::rel_frobenius(emp, discrete_stationary_covariance(loss, dyn).matrix());
        const double e_lyap = oracle::rel_frobenius(emp, continuous_stationary_covariance(loss, dyn).matrix());
        pass = pass && e_stein <= kSteinFrobenius && e_lyap <= kLyapunovFrobenius;
        detail += fmt::format("d={}: Stein {:.4f} Lyapunov {:.4f}; ", n, e_stein, e_lyap);
    }
    const QuadraticLoss loss(random_spd(3, 0.5, 1.0, 23), Vector::Zero(3));
    double previous = INFINITY;
    std::string gaps;
    for (double eta : {0.1, 0.05, 0.01}) {
        const SgdDynamics dyn(eta, 1, Matrix::Identity(3, 3));
        const double gap = oracle::rel_frobenius(discrete_stationary_covariance(loss, dyn).matrix(),
                                                 continuous_stationary_covariance(loss, dyn).matrix());
        pass = pass && gap < previous;
        previous = gap;
        gaps += fmt::format(" {:.4g}", gap);
    }
    return {pass, detail + "Stein-Lyapunov gap over eta {0.1,0.05,0.01}:" + gaps};
}

Outcome criterion3() {
    double worst_trace = 0.0;
    double worst_kl = 0.0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const Eigen::Index n = dim_for(i);
        const SpdMatrix a = random_spd(n, 0.1, 10.0, derive_seed(30, i));
        const SpdMatrix c = random_spd(n, 0.1, 10.0, derive_seed(31, i));
        const double eta = 0.01 + 0.09 * static_cast<double>(i % 7) / 6.0;
        const std::int64_t batch = 1 + static_cast<std::int64_t>(i % 5);
        const GaussianMeasure q = stationary_from_dynamics(a, Vector::Zero(n), c, eta, batch);
        const double trace = q.covariance().trace();
        const double expected = 0.5 * eta / static_cast<double>(batch) * (c.matrix() * a.inverse()).trace();
        worst_trace = std::max(worst_trace, std::abs(trace - expected) / std::abs(expected));
        const double exact = kl_divergence(q, GaussianMeasure::standard(n));
        const double via_trace = kl_upper_bound_trace(a, c, eta, batch, q.covariance());
        worst_kl = std::max(worst_kl, std::abs(via_trace - exact) / std::max(1.0, std::abs(exact)));
    }
    return {worst_trace <= kTraceRelative && worst_kl <= kTraceRelative,
            fmt::format("max rel error trace {:.3g}, trace-form KL vs exact {:.3g}", worst_trace, worst_kl)};
}

Outcome criterion4() {
    int outside = 0;
    int negative = 0;
    double worst_z = 0.0;
    for (std::uint64_t i = 0; i < 100; ++i) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(i % 5);
        Rng rng(derive_seed(40, i));
        const GaussianMeasure q(0.5 * standard_normal_vector(rng, n), random_spd(n, 0.5, 2.0, derive_seed(41, i)));
        const GaussianMeasure p(0.5 * standard_normal_vector(rng, n), random_spd(n, 0.5, 2.0, derive_seed(42, i)));
        const double exact = kl_divergence(q, p);
        if (exact < 0.0) ++negative;
        const MonteCarloEstimate mc = mc_kl_estimate(q, p, 100000, derive_seed(43, i));
        const double z = std::abs(mc.estimate - exact) / mc.std_error;
        worst_z = std::max(worst_z, z);
        if (z > kKlStandardErrors) ++outside;
    }
    return {outside == 0 && negative == 0,
            fmt::format("{} of 100 pairs beyond 3 SE (max |z| {:.3f}); negative KL {}", outside, worst_z, negative)};
}

Outcome criterion5() {
    double worst = 0.0;
    double worst_oracle = 0.0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const Eigen::Index n = dim_for(i);
        const SpdMatrix s_pt = random_spd(n, 0.1, 10.0, derive_seed(50, i));
        const SpdMatrix s_ft = random_spd(n, 0.1, 10.0, derive_seed(51, i));
        Rng rng(derive_seed(52, i));
        const GaussianMeasure q_pt(Vector::Zero(n), s_pt);
        const GaussianMeasure q_ft(standard_normal_vector(rng, n), s_ft);
        const double d = discrepancy_d(DomainPair::from_measures(q_pt, q_ft));
        const double twice_kl = 2.0 * kl_divergence(q_ft, q_pt);
        worst = std::max(worst, std::abs(d - twice_kl) / std::max(1.0, twice_kl));
        const double twice_oracle =
            2.0 * oracle::gaussian_kl_eigen(q_ft.mean(), s_ft.matrix(), q_pt.mean(), s_pt.matrix());
        worst_oracle = std::max(worst_oracle, std::abs(d - twice_oracle) / std::max(1.0, twice_oracle));
    }
    const SpdMatrix s = random_spd(4, 0.1, 10.0, 53);
    const double identical = discrepancy_d(DomainPair(s, s, Vector::Zero(4)));
    return {worst <= kDiscrepancyTolerance && worst_oracle <= kDiscrepancyTolerance &&
                std::abs(identical) <= kDiscrepancyTolerance,
            fmt::format("max |D - 2 KL| (relative above 1) {:.3g}, vs eigenvalue oracle {:.3g}; identical domains "
                        "D = {:.3g}",
                        worst, worst_oracle, identical)};
}

Outcome criterion6() {
    const RegressionTask task(Vector::Ones(2), SpdMatrix::identity(2), 1.0, 100);
    const SgdDynamics sgd(0.1, 1, Matrix::Identity(2, 2));
    const SampleSpec spec(100, 0.05);
    const ValidityResult r =
        bound_validity_experiment(task, sgd, spec, GaussianMeasure::standard(2), 200, 60, PosteriorMode::analytic);
    const ValidityResult sim = bound_validity_experiment(task, sgd, spec, GaussianMeasure::standard(2), 200, 60,
                                                         PosteriorMode::simulated, 20000);
    return {r.violation_count <= kMaxViolations && sim.violation_count <= kMaxViolations,
            fmt::format("violations: analytic posterior {}/200, simulated posterior {}/200 (mean gap {:.4f}, "
                        "mean bound {:.4f})",
                        r.violation_count, sim.violation_count, r.gaps.mean, r.bounds.mean)};
}

Outcome criterion7() {
    bool pass = true;
    double lo = INFINITY;
    double hi = -INFINITY;
    for (std::int64_t n : {10000, 100000}) {
        for (double kl : {0.0, 1.0, 5.0, 10.0}) {
            const double ratio = mcallester_bound(kl, SampleSpec(4 * n, 0.05)) / mcallester_bound(kl, SampleSpec(n, 0.05));
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
            pass = pass && ratio >= kRatioLow && ratio <= kRatioHigh;
        }
    }
    double previous = INFINITY;
    for (int k = 0; k < 20; ++k) {
        const auto n = static_cast<std::int64_t>(std::llround(100.0 * std::pow(10.0, 4.0 * k / 19.0)));
        const double b = mcallester_bound(10.0, SampleSpec(n, 0.05));
        pass = pass && b < previous;
        previous = b;
    }
    return {pass, fmt::format("ratio range [{:.4f}, {:.4f}]; strictly decreasing on 20-point grid 1e2..1e6", lo, hi)};
}

Outcome criterion8() {
    const DominanceReport r = dominance_from_terms(1.0, SampleSpec(1000000, 0.05), 1.0, SampleSpec(1000, 0.05));
    return {r.ratio >= kDominanceMin && std::abs(r.ratio - kDominanceReference) <= kDominanceTolerance,
            fmt::format("ft/pt = {:.6f}", r.ratio)};
}

Outcome criterion9() {
    Matrix a = Matrix::Zero(2, 2);
    a.diagonal() << 0.6, 1.0;
    const QuadraticLoss pt(SpdMatrix(a, Strictness::strict), Vector::Zero(2));
    const SgdDynamics dyn(0.1, 1, Matrix::Identity(2, 2));
    TwoStageConfig same{StageSpec{pt, dyn, 500000}, StageSpec{pt, dyn, 500000}};
    same.replicas = 4;
    same.stride = 1;
    same.master_seed = 90;
    const TwoStageResult r = two_stage_run(same);
    const double cov_err = oracle::rel_frobenius(r.ft_estimate.covariance.matrix(), r.pt_estimate.covariance.matrix());
    const double mean_err = (r.ft_estimate.mean - r.pt_estimate.mean).cwiseAbs().maxCoeff();

    TwoStageConfig shifted = same;
    shifted.finetune.loss = QuadraticLoss(SpdMatrix(a, Strictness::strict), Vector::Unit(2, 0));
    const TwoStageResult s = two_stage_run(shifted);
    const double shift_err = (s.ft_estimate.mean - Vector::Unit(2, 0)).cwiseAbs().maxCoeff();
    return {cov_err <= kTwoStageFrobenius && mean_err <= kTwoStageMean && shift_err <= kTwoStageMean,
            fmt::format("identical stages: cov rel {:.4f}, mean diff {:.4f} ({} pooled records); shifted: mean "
                        "error {:.4f}",
                        cov_err, mean_err, r.ft_estimate.sample_count, shift_err)};
}

int run_cli(const std::vector<std::string>& args, std::string* out_text) {
    std::vector<const char*> argv{"diffpac"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str();
    return code;
}

Outcome criterion10() {
    std::string text;
    if (run_cli({"--seed", "10", "lemma-survey", "--pairs", "1000"}, &text) != 0) {
        return {false, "lemma-survey exited non-zero"};
    }
    const nlohmann::json doc = nlohmann::json::parse(text);
    bool pass = doc.at("pairs") == 1000 && doc.at("rows").size() == 10;
    std::int64_t trials = 0;
    std::string fractions;
    for (std::size_t i = 0; i < doc.at("rows").size(); ++i) {
        const auto& row = doc["rows"][i];
        for (const char* key : {"dim", "trials", "holds_count", "holds_fraction", "min_margin", "literal_holds_count"}) {
            pass = pass && row.contains(key);
        }
        const double f = row.at("holds_fraction").get<double>();
        pass = pass && row.at("dim") == static_cast<int>(i + 1) && f >= 0.0 && f <= 1.0;
        trials += row.at("trials").get<std::int64_t>();
        fractions += fmt::format(" {:.2f}", f);
    }
    std::string csv;
    pass = pass && run_cli({"--seed", "10", "lemma-survey", "--format", "csv"}, &csv) == 0 &&
           csv.rfind("dim,trials,holds_count,holds_fraction,min_margin,literal_holds_count\n", 0) == 0 &&
           std::count(csv.begin(), csv.end(), '\n') == 11;
    return {pass && trials == 1000, fmt::format("10 rows, {} pairs; holds fraction by dim:{}", trials, fractions)};
}

Outcome criterion11() {
    const std::string a = write_fixture("a.txt", Matrix(Eigen::Vector2d(0.6, 1.0).asDiagonal()));
    const std::string c = write_fixture("c.txt", Matrix::Identity(2, 2));
    const std::string q = write_text("q.txt", "2\n0.3 0.1\n0.1 0.5\n0.2 -0.1\n");
    const std::string s_pt = write_fixture("spt.txt", Matrix(Eigen::Vector2d(0.05, 0.025).asDiagonal()));
    const std::string s_ft = write_fixture("sft.txt", Matrix(Eigen::Vector2d(0.04, 0.03).asDiagonal()));
    const std::vector<std::pair<std::string, std::string>> runs = {
        {"lyapunov", "lyapunov --a " + a + " --q " + c + " --eta 0.1"},
        {"simulate", "simulate --a " + a + " --c " + c + " --steps 20000 --trajectory " + kTmp + "/acc_traj_RUN.csv"},
        {"two-stage", "two-stage --a-pt " + a + " --pt-steps 20000 --ft-steps 20000 --workers 2"},
        {"kl", "kl --q " + q + " --draws 20000"},
        {"bound", "bound --sigma-pt " + s_pt + " --sigma-ft " + s_ft + " --n 1000"},
        {"lemma-survey", "lemma-survey --pairs 200"},
        {"dominance", "dominance"},
        {"validity", "validity --trials 20 --posterior simulated --steps 5000"},
        {"scaling", "scaling --ns 1000,4000 --trials-per-n 5"},
    };
    int identical = 0;
    std::string failed;
    for (const auto& [name, args] : runs) {
        bool same = true;
        for (const char* format : {"json", "csv"}) {
            std::string outputs[2];
            std::string trajectories[2];
            for (int k = 0; k < 2; ++k) {
                std::string cmd_args = args;
                const auto pos = cmd_args.find("RUN");
                if (pos != std::string::npos) cmd_args.replace(pos, 3, std::to_string(k));
                const std::string out = fmt::format("{}/acc_det_{}_{}_{}", kTmp, name, format, k);
                const std::string cmd = fmt::format("{} --seed 77 --format {} --output {} {} > /dev/null 2>&1", kExe,
                                                    format, out, cmd_args);
                if (std::system(cmd.c_str()) != 0) same = false;
                outputs[k] = slurp(out);
                if (pos != std::string::npos) trajectories[k] = slurp(fmt::format("{}/acc_traj_{}.csv", kTmp, k));
            }
            same = same && !outputs[0].empty() && outputs[0] == outputs[1] && trajectories[0] == trajectories[1];
        }
        if (same) {
            ++identical;
        } else {
            failed += " " + name;
        }
    }
    return {identical == static_cast<int>(runs.size()),
            fmt::format("{}/{} subcommands byte-identical in json and csv{}", identical, runs.size(),
                        failed.empty() ? "" : "; differing:" + failed)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"Lyapunov/Stein solver residuals and SPD output", criterion1},
        {"simulated chain stationarity", criterion2},
        {"trace identity and trace-form KL", criterion3},
        {"closed-form KL vs Monte-Carlo", criterion4},
        {"discrepancy equals twice KL", criterion5},
        {"bound validity on regression trials", criterion6},
        {"O(1/sqrt N) decay of the complexity term", criterion7},
        {"fine-tuning dominance", criterion8},
        {"two-stage pipeline moments", criterion9},
        {"lemma-survey completion and schema", criterion10},
        {"determinism of every subcommand", criterion11},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome{false, ""};
        try {
            outcome = criteria[i].second();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += outcome.pass ? 0 : 1;
        std::cout << fmt::format("{} criterion {:>2}: {} | {} [{:.2f} s]\n", outcome.pass ? "PASS" : "FAIL", i + 1,
                                 criteria[i].first, outcome.detail, seconds)
                  << std::flush;
    }
    std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
