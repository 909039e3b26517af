#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace diffpac::cli {

enum class Subcommand { lyapunov, simulate, two_stage, kl, bound, lemma_survey, dominance, validity, scaling };
enum class OutputFormat { csv, json };

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigInvalid = 2;
inline constexpr int kExitNumericalFailure = 3;

struct RunConfig {
    Subcommand subcommand;
    /// Subcommand parameters keyed by flag name without the leading dashes.
    std::map<std::string, std::string> parameters;
    std::uint64_t seed = 0;
    /// Empty or "-" writes results to `out` and the summary to `err`.
    std::string output_path;
    OutputFormat format = OutputFormat::json;
};

struct ParamSpec {
    std::string name;
    /// Empty when the parameter is optional with no default.
    std::string default_value;
    bool required;
    std::string help;
};

const char* subcommand_name(Subcommand sub);
Subcommand parse_subcommand(const std::string& name);
const std::vector<ParamSpec>& subcommand_params(Subcommand sub);

/// Fills defaults and rejects unknown or missing keys. Throws ConfigError.
RunConfig validate(RunConfig config);

/// Executes a validated configuration. Returns the process exit status:
/// 0 success, 2 invalid configuration, 3 numerical failure.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Full command-line entry point (argument parsing, --help, --config files).
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace diffpac::cli
