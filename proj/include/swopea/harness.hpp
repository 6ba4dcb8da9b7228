#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "swopea/agent.hpp"
#include "swopea/io.hpp"

namespace swopea {

enum class WindowPolicy { kFixed, kFull, kCorollary };

struct AgentSpec {
  std::string name;
  std::string algorithm = "swopea";  // or a BaselineKind name
  WindowPolicy window_policy = WindowPolicy::kFull;
  int window = 0;  // kFixed only
  AgentConfig config;
};

/// Parsed experiment config. `mdp` and `function_class` keep the source
/// descriptions; relative paths inside them resolve against `base_dir`.
struct ExperimentConfig {
  std::filesystem::path base_dir;
  Json mdp;
  Json function_class;
  std::vector<AgentSpec> agents;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir;
  int workers = 1;
};

/// Throws std::invalid_argument on schema errors or missing files.
ExperimentConfig parse_config(const Json& j, const std::filesystem::path& base_dir);
/// Reads the file and applies the SWOPEA_OUTPUT_DIR override.
ExperimentConfig load_config(const std::filesystem::path& path);

struct Environment {
  NonstationaryMdp mdp;
  FunctionClass fc;
};

Environment build_environment(const ExperimentConfig& config);

/// Window the corollary picks for this environment: L and L_theta from the
/// MDP, d = max(1, greedy DBE at eps = sqrt(1/K)), log|G| from the aux class.
int corollary_window(const Environment& env, Feedback feedback);

struct RunRecord {
  std::string agent;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  double total_regret = 0.0;
  bool qstar_always_in_set = false;
  int optimism_violations = 0;
  double mean_conf_set_size = 0.0;
  int window = -1;
  double beta = 0.0;
  std::string curve_path;  // relative to the output directory
};

struct AgentSummary {
  std::string name;
  int n_runs = 0;
  int n_errors = 0;
  double median_regret = 0.0;
  double q1_regret = 0.0;
  double q3_regret = 0.0;
  double qstar_always_rate = 0.0;
};

struct ExperimentSummary {
  std::vector<RunRecord> runs;  // agent-major, seeds in config order
  std::vector<AgentSummary> agents;
  Json environment;
  [[nodiscard]] Json to_json() const;
  [[nodiscard]] bool any_error() const;
};

/// Linear-interpolation quantile of a nonempty sample, q in [0, 1].
double quantile(std::vector<double> xs, double q);

/// Builds the environment once and runs every (agent, seed) pair on a
/// worker pool. With write_outputs, writes runs/<agent>__seed<seed>.{json,csv}
/// and summary.json under config.output_dir.
ExperimentSummary run_experiment(const ExperimentConfig& config, bool write_outputs = true);

struct SweepRow {
  int w = 0;
  int n_runs = 0;
  int n_errors = 0;
  double median_regret = 0.0;
  double q1_regret = 0.0;
  double q3_regret = 0.0;
};

/// SW-OPEA (first swopea agent of the config as template) at each window
/// over all seeds; writes sweep_window.csv. Needs at least two windows.
std::vector<SweepRow> sweep_window(const ExperimentConfig& config, const std::vector<int>& ws);

/// Relative path -> file_hash for every regular file under dir, sorted.
std::map<std::string, std::string> output_hashes(const std::filesystem::path& dir);
/// One hash over the sorted (path, hash) pairs.
std::string combined_hash(const std::map<std::string, std::string>& hashes);

}  // namespace swopea
