#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "swopea/function_class.hpp"
#include "swopea/mdp.hpp"
#include "swopea/rng.hpp"

namespace swopea {

enum class Feedback { kFullInformation, kBandit };
enum class VariationOracle { kExactFromEnv, kZero };

std::string to_string(Feedback f);
std::string to_string(VariationOracle v);
Feedback feedback_from_string(const std::string& name);
VariationOracle variation_oracle_from_string(const std::string& name);

/// One (t, x_h^t, a_h^t, x_{h+1}^t, r_h^t) entry.
struct Transition {
  int episode = 0;
  int state = 0;
  int action = 0;
  int next_state = 0;
  double reward = 0.0;
  bool operator==(const Transition&) const = default;
};

/// Per-step transition lists, appended one whole trajectory at a time.
class SlidingWindowDataset {
 public:
  explicit SlidingWindowDataset(int horizon) : steps_(horizon) {}

  /// Throws std::invalid_argument unless the trajectory has H steps and a
  /// larger episode index than everything stored.
  void add(const Trajectory& trajectory);
  void clear();

  [[nodiscard]] int horizon() const { return static_cast<int>(steps_.size()); }
  [[nodiscard]] std::span<const Transition> step(int h) const { return steps_.at(h); }
  /// Entries of step h with episode in [max(0, k - w), k]; the whole history
  /// up to k when w is empty.
  [[nodiscard]] std::span<const Transition> window(int h, int k, std::optional<int> w) const;

 private:
  std::vector<std::vector<Transition>> steps_;
};

/// Sum over `data` of (xi(x, a) - rho - next_values[x'])^2. rho is
/// reward_fn(x, a) when `reward_fn` is given (full information) and the
/// stored realized reward otherwise (bandit).
double sw_bellman_loss(const StepTable& xi, std::span<const double> next_values,
                       std::span<const Transition> data, const StepTable* reward_fn = nullptr);

struct AgentConfig {
  std::optional<int> window;  // empty: full history
  /// Explicit beta; when empty it is c H^2 log(K H |G| / delta).
  std::optional<double> beta;
  double c = 0.5;
  double delta = 0.2;
  Feedback feedback = Feedback::kFullInformation;
  VariationOracle variation_oracle = VariationOracle::kExactFromEnv;
  int restart_period = 0;      // reset data and B every this many episodes; 0 never
  bool unconstrained = false;  // B^k = F every episode
};

/// c H^2 log(K H |G| / delta)
double beta_from_constant(double c, int horizon, int n_episodes, std::size_t aux_size,
                          double delta);
double resolve_beta(const AgentConfig& config, int horizon, int n_episodes, std::size_t aux_size);

struct ConfidenceSet {
  std::vector<int> members;  // increasing indices into FunctionClass::members
  /// Per member, max over h of loss minus (best aux loss + slack); <= 0 iff kept.
  std::vector<double> excess;
  std::vector<double> slack;  // per step
};

/// Members whose windowed loss at every step is within beta plus variation
/// slack of the best step-h auxiliary component. Variation terms are read
/// from `mdp` under kExactFromEnv; `data_start` is the first episode whose
/// data may be used (restarts).
ConfidenceSet update_confidence_set(const FunctionClass& fc, const SlidingWindowDataset& data,
                                    int k, const AgentConfig& config, double beta,
                                    const NonstationaryMdp& mdp, int data_start = 0);

class EmptyConfidenceSet : public std::runtime_error {
 public:
  explicit EmptyConfidenceSet(int episode)
      : std::runtime_error("empty confidence set at episode " + std::to_string(episode)),
        episode_(episode) {}
  [[nodiscard]] int episode() const { return episode_; }

 private:
  int episode_;
};

struct Selection {
  int member = -1;
  double value = 0.0;  // max_a f_1(x_1, a)
  Policy policy;
};

/// Member of `candidates` maximizing max_a f_1(x_1, a), lowest index on ties.
/// Throws EmptyConfidenceSet(episode) when `candidates` is empty.
Selection optimistic_select(std::span<const int> candidates, const FunctionClass& fc,
                            int initial_state, int episode = 0);

struct EpisodeRecord {
  int episode = 0;
  int member = -1;
  double optimistic_value = 0.0;
  double optimal_value = 0.0;
  double regret_increment = 0.0;
  int conf_set_size = 0;        // |B^k| after the update
  bool qstar_in_set = false;    // Q*_{(*,k)} in B^k
  bool optimism_holds = true;   // checked when Q* of the previous episode was in B^{k-1}
  Trajectory trajectory;
};

struct RunResult {
  std::string algorithm;
  std::uint64_t seed = 0;
  double beta = 0.0;
  int window = -1;  // -1: full history
  Feedback feedback = Feedback::kFullInformation;
  std::vector<EpisodeRecord> episodes;
  std::vector<Policy> policies;
  std::vector<double> cum_regret;
  double total_regret = 0.0;
  bool qstar_always_in_set = true;
  int optimism_violations = 0;

  [[nodiscard]] double mean_conf_set_size() const;
};

/// Algorithm 1 (full information) or its bandit-feedback variant, chosen by
/// config.feedback. Throws EmptyConfidenceSet when a played set is empty.
RunResult run_swopea(const NonstationaryMdp& mdp, const FunctionClass& fc,
                     const AgentConfig& config, Rng& rng);

enum class BaselineKind { kFullWindow, kRestart, kOracle, kStationaryGreedy };

std::string to_string(BaselineKind kind);
BaselineKind baseline_from_string(const std::string& name);

/// full_window: w = K. restart: data and B reset every config.restart_period
/// episodes. oracle: per-episode optimal policy. stationary_greedy: no
/// confidence constraint.
RunResult run_baseline(const NonstationaryMdp& mdp, const FunctionClass& fc, BaselineKind kind,
                       const AgentConfig& config, Rng& rng);

/// Window from the sliding-window corollaries: ceil(sqrt(log|G|) / denom) when
/// the drift term beats (sqrt(log|G|) - 1/(H sqrt d)) / K, else K. The drift
/// term is sqrt(L), plus sqrt(L_theta / H) under bandit feedback, and denom
/// adds 1/(H K sqrt d) to it.
int choose_window(double L, double L_theta, int horizon, int n_episodes, int d, double log_card_G,
                  Feedback feedback);

}  // namespace swopea
