#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "swopea/rng.hpp"
#include "swopea/tables.hpp"

namespace swopea {

/// Transitions P_h(.|s,a) and rewards r_h(s,a) of one episode, for every step.
///
/// Steps, states and actions are 0-based. The last step's transition rows are
/// stored like any other; the value recursion never reads past step H-1.
class EpisodeModel {
 public:
  EpisodeModel(Dims dims, std::vector<double> transitions, std::vector<double> rewards);

  /// All transitions and rewards zero-initialized (rows are NOT distributions).
  explicit EpisodeModel(Dims dims);

  [[nodiscard]] const Dims& dims() const { return dims_; }

  [[nodiscard]] double transition(int h, int s, int a, int next) const {
    return transitions_[row_offset(h, s, a) + next];
  }
  [[nodiscard]] double reward(int h, int s, int a) const { return rewards_[reward_offset(h, s, a)]; }

  /// P_h(.|s,a) as a span over next states.
  [[nodiscard]] std::span<const double> row(int h, int s, int a) const {
    return {transitions_.data() + row_offset(h, s, a), static_cast<std::size_t>(dims_.n_states)};
  }
  [[nodiscard]] std::span<double> mutable_row(int h, int s, int a) {
    return {transitions_.data() + row_offset(h, s, a), static_cast<std::size_t>(dims_.n_states)};
  }
  double& mutable_reward(int h, int s, int a) { return rewards_[reward_offset(h, s, a)]; }

  /// r_h as an |S| x |A| table.
  [[nodiscard]] StepTable reward_table(int h) const;

  [[nodiscard]] const std::vector<double>& transitions() const { return transitions_; }
  [[nodiscard]] const std::vector<double>& rewards() const { return rewards_; }

  bool operator==(const EpisodeModel&) const = default;

 private:
  [[nodiscard]] std::size_t reward_offset(int h, int s, int a) const {
    return (static_cast<std::size_t>(h) * dims_.n_states + s) * dims_.n_actions + a;
  }
  [[nodiscard]] std::size_t row_offset(int h, int s, int a) const {
    return reward_offset(h, s, a) * static_cast<std::size_t>(dims_.n_states);
  }

  Dims dims_;
  std::vector<double> transitions_;  // [h][s][a][s']
  std::vector<double> rewards_;      // [h][s][a]
};

/// Sequence of K episode models sharing (S, A, H, x_1).
///
/// Episodes are held through shared immutable pointers, so a stationary
/// sequence stores one model regardless of K.
class NonstationaryMdp {
 public:
  NonstationaryMdp(Dims dims, int initial_state,
                   std::vector<std::shared_ptr<const EpisodeModel>> episodes);

  /// K copies of one model.
  static NonstationaryMdp stationary(EpisodeModel model, int initial_state, int n_episodes);

  [[nodiscard]] const Dims& dims() const { return dims_; }
  [[nodiscard]] int n_states() const { return dims_.n_states; }
  [[nodiscard]] int n_actions() const { return dims_.n_actions; }
  [[nodiscard]] int horizon() const { return dims_.horizon; }
  [[nodiscard]] int n_episodes() const { return static_cast<int>(episodes_.size()); }
  [[nodiscard]] int initial_state() const { return initial_state_; }

  /// Model of episode k (0-based). Throws std::out_of_range.
  [[nodiscard]] const EpisodeModel& episode(int k) const;
  [[nodiscard]] const std::shared_ptr<const EpisodeModel>& episode_ptr(int k) const;

  /// Single-episode MDP holding episode k.
  [[nodiscard]] NonstationaryMdp snapshot(int k) const;

  /// For each episode, the index of the first episode with identical content.
  [[nodiscard]] std::vector<int> distinct_episode_map() const;

 private:
  Dims dims_;
  int initial_state_ = 0;
  std::vector<std::shared_ptr<const EpisodeModel>> episodes_;
};

struct Violation {
  int episode = -1;
  int step = -1;
  int state = -1;
  int action = -1;
  std::string kind;  // "row_sum", "negative_probability", "reward_range", "initial_state", ...
  double value = 0.0;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  [[nodiscard]] bool ok() const { return violations.empty(); }
};

/// Checks distribution rows (sum to 1 within 1e-12, no negative entry),
/// rewards in [0, 1] and the initial state.
ValidationReport validate(const NonstationaryMdp& mdp);

/// Q*_{h;(*,k)} and V*_{h;(*,k)}; v_star has H+1 entries with v_star[H] = 0.
struct ValueTables {
  int episode = 0;
  std::vector<StepTable> q_star;
  std::vector<std::vector<double>> v_star;
};

ValueTables optimal_values(const NonstationaryMdp& mdp, int k);
ValueTables optimal_values(const EpisodeModel& model);

/// Greedy policy with respect to Q* (lowest action on ties).
Policy optimal_policy(const ValueTables& values);

/// Exact V^pi_{1;(*,k)}(x_1) by backward induction.
double evaluate_policy(const NonstationaryMdp& mdp, int k, const Policy& policy);

struct TrajectoryStep {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
  bool operator==(const TrajectoryStep&) const = default;
};

struct Trajectory {
  int episode = 0;
  std::vector<TrajectoryStep> steps;
  bool operator==(const Trajectory&) const = default;
};

Trajectory sample_episode(const NonstationaryMdp& mdp, int k, const Policy& policy, Rng& rng);

struct RegretReport {
  double total = 0.0;
  std::vector<double> increments;
};

/// Sum over episodes of V*_{1;(*,k)}(x_1) - V^{pi^k}_{1;(*,k)}(x_1).
RegretReport dynamic_regret(const NonstationaryMdp& mdp, std::span<const Policy> policies);

/// sup_{s,a} || P_h^a(.|s,a) - P_h^b(.|s,a) ||_1
double transition_distance(const EpisodeModel& a, const EpisodeModel& b, int h);
/// sup_{s,a} | r_h^a(s,a) - r_h^b(s,a) |
double reward_distance(const EpisodeModel& a, const EpisodeModel& b, int h);

struct VariationBudgets {
  double delta_r = 0.0;
  double delta_p = 0.0;
};

/// Adjacent-episode variation budgets, with episode "-1" equal to episode 0.
VariationBudgets variation_budgets(const NonstationaryMdp& mdp);

struct LocalVariation {
  double delta_p_w = 0.0;
  double delta_r_w = 0.0;
};

/// Sum over t in [max(0, k-w), k] of the sup distance between episode k and t
/// at step h.
LocalVariation local_variation(const NonstationaryMdp& mdp, int k, int h, int w);

struct AverageVariation {
  double l = 0.0;
  double l_theta = 0.0;
};

/// Largest windowed average of adjacent-episode distances, maximized over
/// steps; zero when K < 2.
AverageVariation average_variation(const NonstationaryMdp& mdp);

/// State distribution at each step h = 0..H-1 when following `policy` from
/// x_1 under `model`.
std::vector<std::vector<double>> state_distributions(const EpisodeModel& model, int initial_state,
                                                     const Policy& policy);

}  // namespace swopea
