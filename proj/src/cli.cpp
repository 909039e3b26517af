#include "diffpac/cli.hpp"

#include <charconv>
#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "diffpac/bounds.hpp"
#include "diffpac/error.hpp"
#include "diffpac/experiments.hpp"
#include "diffpac/gaussian.hpp"
#include "diffpac/matrix_io.hpp"
#include "diffpac/random.hpp"
#include "diffpac/serialize.hpp"
#include "diffpac/sgd.hpp"

namespace diffpac::cli {

namespace {

ParamSpec req(std::string name, std::string help) {
    return ParamSpec{std::move(name), "", true, std::move(help)};
}

ParamSpec opt(std::string name, std::string default_value, std::string help) {
    return ParamSpec{std::move(name), std::move(default_value), false, std::move(help)};
}

struct SubcommandInfo {
    Subcommand id;
    const char* name;
    const char* description;
    std::vector<ParamSpec> params;
};

const std::vector<SubcommandInfo>& registry() {
    static const std::vector<SubcommandInfo> table = {
        {Subcommand::lyapunov, "lyapunov",
         "Solve A X + X A = (eta/batch) Q for the stationary covariance",
         {req("a", "Hessian A, matrix file (strict SPD)"),
          req("q", "noise covariance Q, matrix file (symmetric)"),
          opt("eta", "1", "learning rate"),
          opt("batch", "1", "batch size")}},
        {Subcommand::simulate, "simulate",
         "Simulate the discrete OU chain of constant-step SGD and estimate its stationary moments",
         {req("a", "Hessian A, matrix file"),
          opt("c", "", "gradient-noise covariance C, matrix file (default I)"),
          opt("b", "", "gradient-noise factor B with C = B^T B, matrix file (excludes --c)"),
          opt("minimizer", "", "loss minimizer, vector file (default 0)"),
          opt("init", "", "initial state, vector file (default 0)"),
          opt("eta", "0.1", "learning rate"),
          opt("batch", "1", "batch size"),
          opt("steps", "100000", "number of SGD steps"),
          opt("stride", "10", "record every stride-th state"),
          opt("burn-in", "", "records discarded before estimating moments (default half)"),
          opt("allow-unstable", "false", "run even if spectral radius of I - eta A >= 1"),
          opt("trajectory", "", "optional CSV path for the recorded trajectory")}},
        {Subcommand::two_stage, "two-stage",
         "Pre-train then fine-tune with independent replica chains and pooled moments",
         {req("a-pt", "pre-training Hessian, matrix file"),
          opt("c-pt", "", "pre-training noise covariance, matrix file (default I)"),
          opt("minimizer-pt", "", "pre-training minimizer, vector file (default 0)"),
          opt("eta-pt", "0.05", "pre-training learning rate"),
          opt("batch-pt", "1", "pre-training batch size"),
          opt("a-ft", "", "fine-tuning Hessian, matrix file (default: pre-training Hessian)"),
          opt("c-ft", "", "fine-tuning noise covariance (default: pre-training one)"),
          opt("minimizer-ft", "", "fine-tuning minimizer, vector file (default: pre-training one)"),
          opt("eta-ft", "", "fine-tuning learning rate (default: pre-training one)"),
          opt("batch-ft", "", "fine-tuning batch size (default: pre-training one)"),
          opt("pt-steps", "100000", "pre-training steps per replica"),
          opt("ft-steps", "100000", "fine-tuning steps per replica"),
          opt("replicas", "4", "independent replicas (>= 2)"),
          opt("stride", "10", "record every stride-th state"),
          opt("burn-in", "", "records discarded per stage (default half)"),
          opt("init-mode", "chain_continue", "fine-tuning start: chain_continue | analytic_sample"),
          opt("workers", "0", "worker threads (0 = hardware concurrency); output does not depend on it")}},
        {Subcommand::kl, "kl",
         "Closed-form Gaussian KL(q || p) next to its Monte-Carlo estimate",
         {req("q", "Gaussian fixture: covariance matrix then mean line"),
          opt("p", "", "Gaussian fixture (default standard normal)"),
          opt("draws", "100000", "Monte-Carlo draws from q (>= 1000)")}},
        {Subcommand::bound, "bound",
         "PAC-Bayes complexity term: from --kl directly, pre-training (--sigma-pt) or fine-tuning "
         "(--sigma-pt --sigma-ft [--shift])",
         {opt("kl", "", "KL divergence for the McAllester form"),
          opt("sigma-pt", "", "pre-training stationary covariance, matrix file"),
          opt("sigma-ft", "", "fine-tuning stationary covariance, matrix file"),
          opt("shift", "", "fine-tuning centre shift, vector file (default 0)"),
          req("n", "sample size N"),
          opt("delta", "0.05", "confidence parameter")}},
        {Subcommand::lemma_survey, "lemma-survey",
         "Survey D <= D-tilde on random domain pairs; one row per dimension",
         {opt("pairs", "1000", "number of random pairs"),
          opt("max-dim", "10", "pair i has dimension 1 + (i mod max-dim)"),
          opt("eig-low", "0.1", "smallest covariance eigenvalue"),
          opt("eig-high", "10", "largest covariance eigenvalue"),
          opt("shift-scale", "1", "shift ~ shift-scale * N(0, I)")}},
        {Subcommand::dominance, "dominance",
         "Compare pre-training and fine-tuning complexity terms",
         {opt("d-pt", "1", "pre-training discrepancy D(Q_PT, P)"),
          opt("d-ft", "1", "fine-tuning discrepancy D(Q_FT, Q_PT)"),
          opt("n-pt", "1000000", "pre-training sample size"),
          opt("n-ft", "1000", "fine-tuning sample size"),
          opt("delta", "0.05", "confidence parameter")}},
        {Subcommand::validity, "validity",
         "Repeated regression trials counting violations of R(Q) <= R_hat(Q) + bound",
         {opt("dim", "2", "parameter dimension"),
          opt("n", "100", "sample size per trial"),
          opt("noise-std", "1", "label noise standard deviation"),
          opt("feature-cov", "", "feature covariance, matrix file (default I)"),
          opt("weights", "", "true weights, vector file (default all ones)"),
          opt("eta", "0.1", "learning rate"),
          opt("batch", "1", "batch size"),
          opt("noise-scale", "1", "gradient-noise covariance C = noise-scale * I"),
          opt("delta", "0.05", "confidence parameter"),
          opt("trials", "200", "number of trials (>= 10)"),
          opt("posterior", "analytic", "analytic | simulated"),
          opt("steps", "20000", "chain length for the simulated posterior")}},
        {Subcommand::scaling, "scaling",
         "Mean bound and gap as functions of the sample size",
         {opt("ns", "1000,4000,16000,64000", "comma-separated, strictly increasing sample sizes"),
          opt("dim", "2", "parameter dimension"),
          opt("noise-std", "1", "label noise standard deviation"),
          opt("feature-cov", "", "feature covariance, matrix file (default I)"),
          opt("weights", "", "true weights, vector file (default all ones)"),
          opt("eta", "0.1", "learning rate"),
          opt("batch", "1", "batch size"),
          opt("noise-scale", "1", "gradient-noise covariance C = noise-scale * I"),
          opt("delta", "0.05", "confidence parameter"),
          opt("trials-per-n", "20", "trials per sample size")}},
    };
    return table;
}

const SubcommandInfo& info(Subcommand sub) {
    for (const SubcommandInfo& entry : registry()) {
        if (entry.id == sub) return entry;
    }
    throw ConfigError("unknown subcommand");
}

// Typed access to validated parameters.
class Params {
public:
    explicit Params(const std::map<std::string, std::string>& values) : values_(values) {}

    bool has(const std::string& key) const {
        auto it = values_.find(key);
        return it != values_.end() && !it->second.empty();
    }

    const std::string& text(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end() || it->second.empty()) {
            throw ConfigError(fmt::format("--{} is required", key));
        }
        return it->second;
    }

    double real(const std::string& key) const {
        const std::string& s = text(key);
        char* end = nullptr;
        const double value = std::strtod(s.c_str(), &end);
        if (end != s.c_str() + s.size() || !std::isfinite(value)) {
            throw ConfigError(fmt::format("--{}: '{}' is not a finite real", key, s));
        }
        return value;
    }

    std::int64_t integer(const std::string& key) const {
        return parse_integer(key, text(key));
    }

    bool boolean(const std::string& key) const {
        const std::string& s = text(key);
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
        throw ConfigError(fmt::format("--{}: '{}' is not true/false", key, s));
    }

    std::vector<std::int64_t> integer_list(const std::string& key) const {
        std::vector<std::int64_t> values;
        std::stringstream stream(text(key));
        std::string item;
        while (std::getline(stream, item, ',')) {
            values.push_back(parse_integer(key, item));
        }
        return values;
    }

    Matrix matrix(const std::string& key) const { return read_matrix_file(text(key)); }
    Vector vector(const std::string& key) const { return read_vector_file(text(key)); }

private:
    static std::int64_t parse_integer(const std::string& key, const std::string& s) {
        std::int64_t value = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            throw ConfigError(fmt::format("--{}: '{}' is not an integer", key, s));
        }
        return value;
    }

    const std::map<std::string, std::string>& values_;
};

// Results in both formats plus the one-line summary.
struct Output {
    JsonObject json;
    std::string csv;
    std::string summary;
};

std::vector<std::vector<double>> rows_of(const Matrix& m) {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            rows[static_cast<std::size_t>(i)].push_back(m(i, j));
        }
    }
    return rows;
}

std::vector<double> values_of(const Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

std::string matrix_csv(const Matrix& m) {
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out += (j > 0 ? "," : "") + format_real(m(i, j));
        }
        out += '\n';
    }
    return out;
}

// Two-column CSV for results that are not naturally tabular.
class KeyValueCsv {
public:
    KeyValueCsv() : text_("key,value\n") {}

    void add(const std::string& key, double value) { text_ += key + "," + format_real(value) + "\n"; }
    void add(const std::string& key, std::int64_t value) { text_ += key + "," + std::to_string(value) + "\n"; }
    void add_vector(const std::string& key, const Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) add(fmt::format("{}_{}", key, i), v(i));
    }
    void add_matrix(const std::string& key, const Matrix& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) add(fmt::format("{}_{}_{}", key, i, j), m(i, j));
    }
    std::string str() const { return text_; }

private:
    std::string text_;
};

double relative_frobenius(const Matrix& estimate, const Matrix& reference) {
    return (estimate - reference).norm() / reference.norm();
}

Output run_lyapunov(const Params& p) {
    const SpdMatrix a(p.matrix("a"), Strictness::strict);
    const double scale = p.real("eta") / static_cast<double>(p.integer("batch"));
    if (p.integer("batch") < 1) throw ConfigError("--batch must be >= 1");
    const SymmetricMatrix q(scale * SymmetricMatrix(p.matrix("q")).matrix());
    const SymmetricMatrix x = solve_continuous_lyapunov(a, q);
    const double residual = lyapunov_residual(a.matrix(), x.matrix(), q.matrix());
    const double trace_identity = 0.5 * a.solve(q.matrix()).trace();

    Output out;
    out.json.add("sigma", rows_of(x.matrix()))
        .add("residual", residual)
        .add("trace", x.matrix().trace())
        .add("trace_identity", trace_identity);
    out.csv = matrix_csv(x.matrix());
    out.summary = fmt::format("lyapunov: dim {} residual {} trace {}", x.dim(), format_real(residual),
                              format_real(x.matrix().trace()));
    return out;
}

SgdDynamics dynamics_from(const Params& p, Eigen::Index dim, const std::string& c_key,
                          const std::string& b_key, double eta, std::int64_t batch) {
    if (!b_key.empty() && p.has(b_key)) {
        if (p.has(c_key)) throw ConfigError(fmt::format("--{} and --{} are exclusive", c_key, b_key));
        return SgdDynamics(eta, batch, p.matrix(b_key));
    }
    if (p.has(c_key)) {
        return SgdDynamics::from_noise_cov(eta, batch, SpdMatrix(p.matrix(c_key), Strictness::semidefinite));
    }
    return SgdDynamics(eta, batch, Matrix::Identity(dim, dim));
}

Output run_simulate(const Params& p) {
    const SpdMatrix a(p.matrix("a"), Strictness::strict);
    const Eigen::Index d = a.dim();
    const Vector minimizer = p.has("minimizer") ? p.vector("minimizer") : Vector(Vector::Zero(d));
    const Vector init = p.has("init") ? p.vector("init") : Vector(Vector::Zero(d));
    const QuadraticLoss loss(a, minimizer);
    const SgdDynamics dyn = dynamics_from(p, d, "c", "b", p.real("eta"), p.integer("batch"));
    const StabilityReport stability = stability_check(loss, dyn);

    const auto seed = static_cast<std::uint64_t>(std::stoull(p.text("seed")));
    const Trajectory traj = simulate_chain(init, loss, dyn, p.integer("steps"), p.integer("stride"),
                                           seed, p.boolean("allow-unstable"));
    if (p.has("trajectory")) {
        std::ostringstream csv;
        write_trajectory_csv(csv, traj);
        write_text_file(p.text("trajectory"), csv.str());
    }
    const Eigen::Index burn_in = p.has("burn-in") ? p.integer("burn-in") : default_burn_in(traj);
    const MomentEstimate moments = estimate_stationary(traj, burn_in);

    Output out;
    KeyValueCsv csv;
    out.json.add("stable", stability.stable)
        .add("spectral_radius", stability.spectral_radius)
        .add("records", static_cast<std::int64_t>(traj.record_count()))
        .add("burn_in", static_cast<std::int64_t>(burn_in))
        .add("empirical_mean", values_of(moments.mean))
        .add("empirical_cov", rows_of(moments.covariance.matrix()));
    csv.add("stable", std::int64_t{stability.stable ? 1 : 0});
    csv.add("spectral_radius", stability.spectral_radius);
    csv.add("records", static_cast<std::int64_t>(traj.record_count()));
    csv.add("burn_in", static_cast<std::int64_t>(burn_in));
    csv.add_vector("empirical_mean", moments.mean);
    csv.add_matrix("empirical_cov", moments.covariance.matrix());
    out.summary = fmt::format("simulate: {} records, spectral radius {}", traj.record_count(),
                              format_real(stability.spectral_radius));
    if (stability.stable) {
        const Matrix stein = discrete_stationary_covariance(loss, dyn).matrix();
        const Matrix lyap = continuous_stationary_covariance(loss, dyn).matrix();
        const double err_stein = relative_frobenius(moments.covariance.matrix(), stein);
        const double err_lyap = relative_frobenius(moments.covariance.matrix(), lyap);
        out.json.add("stein_cov", rows_of(stein))
            .add("lyapunov_cov", rows_of(lyap))
            .add("rel_error_stein", err_stein)
            .add("rel_error_lyapunov", err_lyap);
        csv.add_matrix("stein_cov", stein);
        csv.add_matrix("lyapunov_cov", lyap);
        csv.add("rel_error_stein", err_stein);
        csv.add("rel_error_lyapunov", err_lyap);
        out.summary += fmt::format(", relative error vs Stein {}", format_real(err_stein));
    }
    out.csv = csv.str();
    return out;
}

Output run_two_stage(const Params& p) {
    const SpdMatrix a_pt(p.matrix("a-pt"), Strictness::strict);
    const Eigen::Index d = a_pt.dim();
    const Vector min_pt = p.has("minimizer-pt") ? p.vector("minimizer-pt") : Vector(Vector::Zero(d));
    const double eta_pt = p.real("eta-pt");
    const std::int64_t batch_pt = p.integer("batch-pt");
    const SgdDynamics dyn_pt = dynamics_from(p, d, "c-pt", "", eta_pt, batch_pt);

    const SpdMatrix a_ft = p.has("a-ft") ? SpdMatrix(p.matrix("a-ft"), Strictness::strict) : a_pt;
    const Vector min_ft = p.has("minimizer-ft") ? p.vector("minimizer-ft") : min_pt;
    const double eta_ft = p.has("eta-ft") ? p.real("eta-ft") : eta_pt;
    const std::int64_t batch_ft = p.has("batch-ft") ? p.integer("batch-ft") : batch_pt;
    const SgdDynamics dyn_ft =
        p.has("c-ft") ? dynamics_from(p, d, "c-ft", "", eta_ft, batch_ft)
                      : SgdDynamics(eta_ft, batch_ft, dyn_pt.noise_factor());

    const std::string& mode = p.text("init-mode");
    if (mode != "chain_continue" && mode != "analytic_sample") {
        throw ConfigError(fmt::format("--init-mode: unknown mode '{}'", mode));
    }
    TwoStageConfig config{.pretrain = StageSpec{QuadraticLoss(a_pt, min_pt), dyn_pt, p.integer("pt-steps")},
                          .finetune = StageSpec{QuadraticLoss(a_ft, min_ft), dyn_ft, p.integer("ft-steps")}};
    config.replicas = p.integer("replicas");
    config.stride = p.integer("stride");
    if (p.has("burn-in")) config.burn_in = p.integer("burn-in");
    config.master_seed = static_cast<std::uint64_t>(std::stoull(p.text("seed")));
    config.init_mode = mode == "analytic_sample" ? InitMode::analytic_sample : InitMode::chain_continue;
    config.workers = static_cast<unsigned>(p.integer("workers"));

    const TwoStageResult result = two_stage_run(config);
    const GaussianMeasure q_pt = stationary_from_dynamics(a_pt, min_pt, dyn_pt.noise_cov(), eta_pt, batch_pt);
    const GaussianMeasure q_ft = stationary_from_dynamics(a_ft, min_ft, dyn_ft.noise_cov(), eta_ft, batch_ft);
    const DomainPair pair = DomainPair::from_measures(q_pt, q_ft);
    const Matrix stein_pt = discrete_stationary_covariance(config.pretrain.loss, dyn_pt).matrix();
    const Matrix stein_ft = discrete_stationary_covariance(config.finetune.loss, dyn_ft).matrix();

    auto stage_json = [](const MomentEstimate& m, const Matrix& stein, const Matrix& lyap) {
        JsonObject json;
        json.add("sample_count", static_cast<std::int64_t>(m.sample_count))
            .add("mean", values_of(m.mean))
            .add("cov", rows_of(m.covariance.matrix()))
            .add("stein_cov", rows_of(stein))
            .add("lyapunov_cov", rows_of(lyap))
            .add("rel_error_stein", relative_frobenius(m.covariance.matrix(), stein));
        return json;
    };
    Output out;
    out.json.add("pretrain", stage_json(result.pt_estimate, stein_pt, q_pt.covariance().matrix()))
        .add("finetune", stage_json(result.ft_estimate, stein_ft, q_ft.covariance().matrix()))
        .add("discrepancy_d", discrepancy_d(pair))
        .add("discrepancy_d_paper_literal", discrepancy_d(pair, LogDetSign::paper_literal))
        .add("discrepancy_d_tilde", discrepancy_d_tilde(pair));

    KeyValueCsv csv;
    csv.add("pt_sample_count", static_cast<std::int64_t>(result.pt_estimate.sample_count));
    csv.add_vector("pt_mean", result.pt_estimate.mean);
    csv.add_matrix("pt_cov", result.pt_estimate.covariance.matrix());
    csv.add("ft_sample_count", static_cast<std::int64_t>(result.ft_estimate.sample_count));
    csv.add_vector("ft_mean", result.ft_estimate.mean);
    csv.add_matrix("ft_cov", result.ft_estimate.covariance.matrix());
    csv.add("discrepancy_d", discrepancy_d(pair));
    csv.add("discrepancy_d_tilde", discrepancy_d_tilde(pair));
    out.csv = csv.str();
    out.summary = fmt::format("two-stage: {} replicas, {} pooled fine-tuning records",
                              config.replicas, result.ft_estimate.sample_count);
    return out;
}

GaussianMeasure gaussian_from_fixture(const std::string& path) {
    const GaussianFixture fixture = read_gaussian_fixture_file(path);
    return GaussianMeasure(fixture.mean, SpdMatrix(fixture.covariance, Strictness::strict));
}

Output run_kl(const Params& p) {
    const GaussianMeasure q = gaussian_from_fixture(p.text("q"));
    const GaussianMeasure prior = p.has("p") ? gaussian_from_fixture(p.text("p")) : GaussianMeasure::standard(q.dim());
    const double exact = kl_divergence(q, prior);
    const auto seed = static_cast<std::uint64_t>(std::stoull(p.text("seed")));
    const MonteCarloEstimate mc = mc_kl_estimate(q, prior, p.integer("draws"), seed);
    const double z = mc.std_error > 0.0 ? (mc.estimate - exact) / mc.std_error : 0.0;

    Output out;
    out.json.add("closed_form", exact)
        .add("mc_estimate", mc.estimate)
        .add("mc_std_error", mc.std_error)
        .add("z_score", z);
    KeyValueCsv csv;
    csv.add("closed_form", exact);
    csv.add("mc_estimate", mc.estimate);
    csv.add("mc_std_error", mc.std_error);
    csv.add("z_score", z);
    out.csv = csv.str();
    out.summary = fmt::format("kl: closed form {} Monte-Carlo {} +/- {}", format_real(exact),
                              format_real(mc.estimate), format_real(mc.std_error));
    return out;
}

void add_report_csv(KeyValueCsv& csv, const std::string& prefix, const BoundReport& r) {
    csv.add(prefix + "kl_term", r.kl_term);
    csv.add(prefix + "complexity_term", r.complexity_term);
    csv.add(prefix + "paper_literal_kl", r.paper_literal_kl);
}

Output run_bound(const Params& p) {
    const SampleSpec spec(p.integer("n"), p.real("delta"));
    Output out;
    KeyValueCsv csv;
    if (p.has("kl")) {
        if (p.has("sigma-pt") || p.has("sigma-ft")) {
            throw ConfigError("--kl cannot be combined with covariance inputs");
        }
        const double kl = p.real("kl");
        const BoundReport report{kl, mcallester_bound(kl, spec), kl,
                                 "McAllester form: sqrt((KL + log(1/delta) + log N + 2) / (2N - 1))"};
        out.json = to_json(report);
        add_report_csv(csv, "", report);
        out.summary = format_real(report.complexity_term);
    } else if (p.has("sigma-ft")) {
        const SpdMatrix sigma_pt(p.matrix("sigma-pt"), Strictness::strict);
        const SpdMatrix sigma_ft(p.matrix("sigma-ft"), Strictness::strict);
        const Vector shift = p.has("shift") ? p.vector("shift") : Vector(Vector::Zero(sigma_pt.dim()));
        const DomainPair pair(sigma_pt, sigma_ft, shift);
        const BoundReport report = finetune_bound(pair, spec);
        const BoundReport dimension = finetune_bound_dimension(pair, spec);
        out.json = to_json(report);
        out.json.add("dimension_dependent", to_json(dimension));
        add_report_csv(csv, "", report);
        add_report_csv(csv, "dimension_dependent_", dimension);
        out.summary = format_real(report.complexity_term);
    } else if (p.has("sigma-pt")) {
        const BoundReport report = pretrain_bound(SpdMatrix(p.matrix("sigma-pt"), Strictness::strict), spec);
        out.json = to_json(report);
        add_report_csv(csv, "", report);
        out.summary = format_real(report.complexity_term);
    } else {
        throw ConfigError("bound: give --kl, --sigma-pt, or --sigma-pt with --sigma-ft");
    }
    out.csv = csv.str();
    return out;
}

Output run_lemma_survey(const Params& p) {
    Lemma2SurveyOptions options;
    options.pairs = p.integer("pairs");
    options.max_dim = p.integer("max-dim");
    options.eigenvalue_low = p.real("eig-low");
    options.eigenvalue_high = p.real("eig-high");
    options.shift_scale = p.real("shift-scale");
    options.seed = static_cast<std::uint64_t>(std::stoull(p.text("seed")));
    const std::vector<Lemma2SurveyRow> rows = lemma2_survey(options);

    Output out;
    out.csv = "dim,trials,holds_count,holds_fraction,min_margin,literal_holds_count\n";
    std::vector<JsonObject> items;
    std::int64_t holds = 0;
    for (const Lemma2SurveyRow& row : rows) {
        out.csv += fmt::format("{},{},{},{},{},{}\n", row.dim, row.trials, row.holds_count,
                               format_real(row.holds_fraction), format_real(row.min_margin),
                               row.literal_holds_count);
        JsonObject item;
        item.add("dim", static_cast<std::int64_t>(row.dim))
            .add("trials", row.trials)
            .add("holds_count", row.holds_count)
            .add("holds_fraction", row.holds_fraction)
            .add("min_margin", row.min_margin)
            .add("literal_holds_count", row.literal_holds_count);
        items.push_back(std::move(item));
        holds += row.holds_count;
    }
    out.json.add("pairs", options.pairs).add("rows", std::move(items));
    out.summary = fmt::format("lemma-survey: D <= D-tilde on {} of {} pairs", holds, options.pairs);
    return out;
}

Output run_dominance(const Params& p) {
    const SampleSpec spec_pt(p.integer("n-pt"), p.real("delta"));
    const SampleSpec spec_ft(p.integer("n-ft"), p.real("delta"));
    const DominanceReport report = dominance_from_terms(p.real("d-pt"), spec_pt, p.real("d-ft"), spec_ft);
    Output out;
    out.json.add("pt_term", report.pt_term).add("ft_term", report.ft_term).add("ratio", report.ratio);
    KeyValueCsv csv;
    csv.add("pt_term", report.pt_term);
    csv.add("ft_term", report.ft_term);
    csv.add("ratio", report.ratio);
    out.csv = csv.str();
    out.summary = fmt::format("dominance: ft/pt = {}", format_real(report.ratio));
    return out;
}

RegressionTask task_from(const Params& p, std::int64_t n) {
    const std::int64_t dim = p.integer("dim");
    if (dim < 1) throw ConfigError("--dim must be >= 1");
    const SpdMatrix feature_cov = p.has("feature-cov") ? SpdMatrix(p.matrix("feature-cov"), Strictness::strict)
                                                       : SpdMatrix::identity(dim);
    const Vector weights = p.has("weights") ? p.vector("weights") : Vector(Vector::Ones(dim));
    return RegressionTask(weights, feature_cov, p.real("noise-std"), n);
}

SgdDynamics isotropic_dynamics(const Params& p, Eigen::Index dim) {
    const double scale = p.real("noise-scale");
    if (!(scale >= 0.0)) throw ConfigError("--noise-scale must be >= 0");
    return SgdDynamics(p.real("eta"), p.integer("batch"), std::sqrt(scale) * Matrix::Identity(dim, dim));
}

Output run_validity(const Params& p) {
    const RegressionTask task = task_from(p, p.integer("n"));
    const SgdDynamics sgd = isotropic_dynamics(p, task.dim());
    const SampleSpec spec(task.sample_size(), p.real("delta"));
    const std::string& posterior = p.text("posterior");
    if (posterior != "analytic" && posterior != "simulated") {
        throw ConfigError(fmt::format("--posterior: unknown mode '{}'", posterior));
    }
    const auto seed = static_cast<std::uint64_t>(std::stoull(p.text("seed")));
    const ValidityResult result = bound_validity_experiment(
        task, sgd, spec, GaussianMeasure::standard(task.dim()), p.integer("trials"), seed,
        posterior == "analytic" ? PosteriorMode::analytic : PosteriorMode::simulated, p.integer("steps"));

    Output out;
    out.json = to_json(result, spec);
    std::ostringstream csv;
    write_trials_csv(csv, result.trials);
    out.csv = csv.str();
    out.summary = fmt::format("validity: {} violations in {} trials (delta {})", result.violation_count,
                              result.trials.size(), format_real(spec.delta));
    return out;
}

Output run_scaling(const Params& p) {
    const std::vector<std::int64_t> ns = p.integer_list("ns");
    if (ns.empty()) throw ConfigError("--ns must list at least one sample size");
    const RegressionTask task = task_from(p, ns.front());
    const SgdDynamics sgd = isotropic_dynamics(p, task.dim());
    const auto seed = static_cast<std::uint64_t>(std::stoull(p.text("seed")));
    const std::vector<ScalingRow> rows =
        scaling_experiment(task, ns, sgd, p.real("delta"), seed, p.integer("trials-per-n"));

    Output out;
    out.json = to_json(rows);
    std::ostringstream csv;
    write_scaling_csv(csv, rows);
    out.csv = csv.str();
    out.summary = fmt::format("scaling: {} sample sizes, bound {} -> {}", rows.size(),
                              format_real(rows.front().mean_bound), format_real(rows.back().mean_bound));
    return out;
}

Output dispatch(const RunConfig& config) {
    std::map<std::string, std::string> values = config.parameters;
    values["seed"] = std::to_string(config.seed);
    const Params p(values);
    switch (config.subcommand) {
        case Subcommand::lyapunov: return run_lyapunov(p);
        case Subcommand::simulate: return run_simulate(p);
        case Subcommand::two_stage: return run_two_stage(p);
        case Subcommand::kl: return run_kl(p);
        case Subcommand::bound: return run_bound(p);
        case Subcommand::lemma_survey: return run_lemma_survey(p);
        case Subcommand::dominance: return run_dominance(p);
        case Subcommand::validity: return run_validity(p);
        case Subcommand::scaling: return run_scaling(p);
    }
    throw ConfigError("unknown subcommand");
}

}  // namespace

const char* subcommand_name(Subcommand sub) {
    return info(sub).name;
}

Subcommand parse_subcommand(const std::string& name) {
    for (const SubcommandInfo& entry : registry()) {
        if (name == entry.name) return entry.id;
    }
    throw ConfigError(fmt::format("unknown subcommand '{}'", name));
}

const std::vector<ParamSpec>& subcommand_params(Subcommand sub) {
    return info(sub).params;
}

RunConfig validate(RunConfig config) {
    const std::vector<ParamSpec>& specs = subcommand_params(config.subcommand);
    for (const auto& [key, value] : config.parameters) {
        bool known = false;
        for (const ParamSpec& spec : specs) known = known || spec.name == key;
        if (!known) {
            throw ConfigError(fmt::format("{}: unknown parameter '{}'", subcommand_name(config.subcommand), key));
        }
    }
    for (const ParamSpec& spec : specs) {
        auto it = config.parameters.find(spec.name);
        if (it == config.parameters.end() || it->second.empty()) {
            if (spec.required) {
                throw ConfigError(fmt::format("{}: missing required parameter --{}",
                                              subcommand_name(config.subcommand), spec.name));
            }
            config.parameters[spec.name] = spec.default_value;
        }
    }
    return config;
}

int run(const RunConfig& raw, std::ostream& out, std::ostream& err) {
    try {
        const RunConfig config = validate(raw);
        const Output result = dispatch(config);
        const std::string contents =
            config.format == OutputFormat::json ? result.json.dump() : result.csv;
        if (config.output_path.empty() || config.output_path == "-") {
            out << contents;
            err << result.summary << '\n';
        } else {
            write_text_file(config.output_path, contents);
            out << result.summary << '\n';
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kExitConfigInvalid;
    } catch (const Error& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumericalFailure;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << '\n';
        return kExitNumericalFailure;
    }
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"diffpac: SGD diffusion, stationary covariances and PAC-Bayes bounds for "
                 "pre-training and fine-tuning"};
    app.name("diffpac");
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.set_config("--config", "", "TOML/INI configuration file; command-line flags override its values");
    app.allow_config_extras(false);

    std::uint64_t seed = 0;
    std::string output_path;
    std::string format = "json";
    app.add_option("--seed", seed, "master seed; all randomness derives from it")->capture_default_str();
    app.add_option("--output,-o", output_path, "output file (default: stdout)");
    app.add_option("--format", format, "output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();

    std::map<std::string, std::map<std::string, std::string>> values;
    std::map<std::string, CLI::App*> subcommands;
    for (const SubcommandInfo& entry : registry()) {
        CLI::App* sub = app.add_subcommand(entry.name, entry.description);
        subcommands[entry.name] = sub;
        for (const ParamSpec& spec : entry.params) {
            std::string help = spec.help;
            if (spec.required) {
                help += " [required]";
            } else if (!spec.default_value.empty()) {
                help += " [default: " + spec.default_value + "]";
            }
            sub->add_option("--" + spec.name, values[entry.name][spec.name], help);
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kExitConfigInvalid;
    }

    RunConfig config{};
    for (const SubcommandInfo& entry : registry()) {
        CLI::App* sub = subcommands[entry.name];
        if (!sub->parsed()) continue;
        config.subcommand = entry.id;
        for (const ParamSpec& spec : entry.params) {
            if (sub->get_option("--" + spec.name)->count() > 0) {
                config.parameters[spec.name] = values[entry.name][spec.name];
            }
        }
    }
    config.seed = seed;
    config.output_path = output_path;
    config.format = format == "csv" ? OutputFormat::csv : OutputFormat::json;
    return run(config, out, err);
}

}  // namespace diffpac::cli
