#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "aronsson/aronsson_check.hpp"
#include "aronsson/candidate.hpp"
#include "aronsson/mintime.hpp"
#include "aronsson/sysmodel.hpp"

namespace aronsson {

using json = nlohmann::json;

/// A fully validated, fully defaulted experiment run: system + candidate +
/// Hamiltonian mode + a list of experiments with their parameters. Unknown
/// configuration keys are rejected so that runs are self-describing, and the
/// resolved form (all defaults materialized) is written next to the results.
struct ExperimentConfig {
    SystemCatalogEntry system;
    Candidate candidate;
    HamiltonianKind kind;
    std::vector<std::string> experiments;
    json params;          // params[experiment] fully defaulted
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    int threads = 1;
    json resolved;        // the whole config with defaults applied

    ExperimentConfig() : system(SystemCatalogEntry::isotropic(1)),
                         candidate(Candidate::quadratic(Mat::Identity(1, 1))) {}
};

/// Throws ConfigError naming the offending key on any validation failure.
ExperimentConfig parse_config(const json& j);

/// Built-in scenario presets; throws ConfigError for unknown names.
json preset_config(const std::string& name);

/// (name, one-line description) for every preset.
std::vector<std::pair<std::string, std::string>> list_presets();

struct RunResult {
    int exit_code = 0;    // 0 pass, 2 assertion failures or experiment errors
    json report;
};

/// Executes every experiment in the config, writing resolved-config.json,
/// report.json, run-info.json and per-experiment CSVs into the output
/// directory. Partial outputs are flushed before a failure exit.
RunResult run_experiments(const ExperimentConfig& config);

}  // namespace aronsson
