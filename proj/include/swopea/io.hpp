#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "swopea/agent.hpp"
#include "swopea/eluder.hpp"
#include "swopea/function_class.hpp"
#include "swopea/mdp.hpp"
#include "swopea/verify.hpp"

namespace swopea {

using Json = nlohmann::json;

// MDP layout: {n_states, n_actions, horizon, n_episodes, initial_state,
// transitions[k][h][s][a][s'], rewards[k][h][s][a]}. On read, a single
// listed episode is repeated n_episodes times. Readers throw
// std::invalid_argument on shape errors and run validate() on the result.
Json to_json(const NonstationaryMdp& mdp);
NonstationaryMdp mdp_from_json(const Json& j);

Json to_json(const EpisodeModel& model);
EpisodeModel episode_from_json(const Json& j, Dims dims);

Json to_json(const QFunction& f);
QFunction qfunction_from_json(const Json& j, Dims dims);

Json to_json(const FunctionClass& fc);
FunctionClass function_class_from_json(const Json& j);

/// Per-episode arrays only; trajectories and policies are not stored.
Json to_json(const RunResult& run);
Json to_json(const DimensionResult& result);
Json to_json(const StepwiseDimension& result);
Json to_json(const VerifyReport& report);

/// episode (1-based), regret_increment, cum_regret, conf_set_size, qstar_in_set
std::string regret_csv(const RunResult& run);

Json read_json_file(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; creates parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);
void write_json_file(const std::filesystem::path& path, const Json& j);

/// 64-bit FNV-1a of a file's bytes as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

}  // namespace swopea
