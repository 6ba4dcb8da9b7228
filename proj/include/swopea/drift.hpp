#pragma once

#include <optional>
#include <string>
#include <vector>

#include "swopea/mdp.hpp"
#include "swopea/rng.hpp"

namespace swopea {

enum class DriftKind { kAbrupt, kGradual, kRandomWalk, kRewardOnly };

std::string to_string(DriftKind kind);
DriftKind drift_kind_from_string(const std::string& name);

/// A (step, state, action) row selected for drift.
struct RowRef {
  int step = 0;
  int state = 0;
  int action = 0;
  bool operator==(const RowRef&) const = default;
};

/// Parameters of a drift generator; `target` is needed by the abrupt, gradual
/// and reward-only kinds.
struct DriftSpec {
  DriftKind kind = DriftKind::kAbrupt;
  int n_episodes = 1;
  int switch_episode = 0;  // abrupt: first episode (0-based) using the target
  double per_step_l1 = 0.0;
  std::optional<EpisodeModel> target;
  std::optional<std::vector<RowRef>> affected;  // random walk; all rows when empty
};

/// Episodes before `switch_episode` use `base`, the rest use `shifted`.
NonstationaryMdp make_abrupt(const EpisodeModel& base, const EpisodeModel& shifted,
                             int initial_state, int switch_episode, int n_episodes);

/// Linear schedule 0, 1/(K-1), ..., 1 (a single 0 when K = 1).
std::vector<double> linear_schedule(int n_episodes);

/// Episode k mixes base and target rowwise with weight schedule[k] on the
/// target. The schedule must start at 0, end at 1 and be nondecreasing.
NonstationaryMdp make_gradual(const EpisodeModel& base, const EpisodeModel& target,
                              int initial_state, std::span<const double> schedule);

/// Like make_gradual, but only the rewards move; transitions stay at `base`.
NonstationaryMdp make_reward_drift(const EpisodeModel& base, const EpisodeModel& target,
                                   int initial_state, std::span<const double> schedule);

struct RandomWalkResult {
  NonstationaryMdp mdp;
  /// realized_l1[k] = max over affected rows of ||P^k - P^{k-1}||_1, k >= 1.
  std::vector<double> realized_l1;
};

/// Euclidean projection onto the probability simplex.
std::vector<double> project_to_simplex(std::span<const double> v);

/// Each episode moves every affected row by a zero-sum random direction of L1
/// norm per_step_l1 and projects back onto the simplex.
RandomWalkResult make_random_walk(const EpisodeModel& base, int initial_state, int n_episodes,
                                  double per_step_l1, Rng& rng,
                                  std::span<const RowRef> affected = {});

/// Dispatches on spec.kind.
NonstationaryMdp generate_drift(const DriftSpec& spec, const EpisodeModel& base, int initial_state,
                                Rng& rng);

/// Random model: Dirichlet-like rows with `support` nonzero next states each
/// (all states when support <= 0) and uniform rewards in [0, 1].
EpisodeModel random_episode_model(Dims dims, Rng& rng, int support = 0);

}  // namespace swopea
