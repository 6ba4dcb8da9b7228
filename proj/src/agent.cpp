#include "swopea/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

namespace swopea {

namespace {

/// Window data at one step, grouped by (x, a, x', rho) so each candidate's
/// loss costs one pass over distinct tuples.
struct LossGroup {
  int state;
  int action;
  int next_state;
  double rho;
  double count;
};

std::vector<LossGroup> group_window(std::span<const Transition> data, const StepTable* reward_fn) {
  std::map<std::tuple<int, int, int, double>, int> counts;
  for (const auto& t : data) {
    const double rho = reward_fn != nullptr ? (*reward_fn)(t.state, t.action) : t.reward;
    ++counts[{t.state, t.action, t.next_state, rho}];
  }
  std::vector<LossGroup> out;
  out.reserve(counts.size());
  for (const auto& [key, n] : counts) {
    const auto& [s, a, s2, rho] = key;
    out.push_back({s, a, s2, rho, static_cast<double>(n)});
  }
  return out;
}

double grouped_loss(const StepTable& xi, std::span<const double> next_values,
                    std::span<const LossGroup> groups) {
  double loss = 0.0;
  for (const auto& g : groups) {
    const double r = xi(g.state, g.action) - g.rho - next_values[g.next_state];
    loss += g.count * r * r;
  }
  return loss;
}

ConfidenceSet confidence_set(const FunctionClass& fc, const std::vector<std::vector<StepTable>>& aux,
                             const SlidingWindowDataset& data, int k, const AgentConfig& config,
                             double beta, const NonstationaryMdp& mdp, int data_start) {
  const int H = fc.dims.horizon;
  const int n = static_cast<int>(fc.members.size());
  ConfidenceSet out;
  out.excess.assign(n, -std::numeric_limits<double>::infinity());
  out.slack.assign(H, beta);
  if (config.unconstrained) {
    out.members.resize(n);
    for (int i = 0; i < n; ++i) out.members[i] = i;
    return out;
  }
  const int span_len = k - data_start;
  const int w = config.window ? std::min(*config.window, span_len) : span_len;
  for (int h = 0; h < H; ++h) {
    if (config.variation_oracle == VariationOracle::kExactFromEnv) {
      const auto lv = local_variation(mdp, k, h, w);
      out.slack[h] += 2.0 * H * H * lv.delta_p_w;
      if (config.feedback == Feedback::kBandit) out.slack[h] += 2.0 * H * lv.delta_r_w;
    }
  }
  for (int h = 0; h < H; ++h) {
    const StepTable rewards = mdp.episode(k).reward_table(h);
    const StepTable* reward_fn = config.feedback == Feedback::kFullInformation ? &rewards : nullptr;
    const auto groups = group_window(data.window(h, k, config.window), reward_fn);
    for (int i = 0; i < n; ++i) {
      const QFunction& f = fc.members[i];
      const auto next = f.next_state_values(h);
      const double own = grouped_loss(f.steps[h], next, groups);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& g : aux[h]) best = std::min(best, grouped_loss(g, next, groups));
      out.excess[i] = std::max(out.excess[i], own - best - out.slack[h]);
    }
  }
  for (int i = 0; i < n; ++i) {
    if (out.excess[i] <= 0.0) out.members.push_back(i);
  }
  return out;
}

std::vector<std::vector<StepTable>> aux_components(const FunctionClass& fc) {
  std::vector<std::vector<StepTable>> aux(fc.dims.horizon);
  for (int h = 0; h < fc.dims.horizon; ++h) aux[h] = fc.aux_step(h);
  return aux;
}

bool contains(const std::vector<int>& sorted, int x) {
  return x >= 0 && std::binary_search(sorted.begin(), sorted.end(), x);
}

/// Index of Q*_{(*,k)} in F for every episode, -1 when absent.
std::vector<int> qstar_members(const NonstationaryMdp& mdp, const FunctionClass& fc,
                               std::vector<double>& optimal_v1) {
  const auto reps = mdp.distinct_episode_map();
  std::vector<int> idx(mdp.n_episodes(), -1);
  optimal_v1.assign(mdp.n_episodes(), 0.0);
  for (int k = 0; k < mdp.n_episodes(); ++k) {
    if (reps[k] != k) {
      idx[k] = idx[reps[k]];
      optimal_v1[k] = optimal_v1[reps[k]];
      continue;
    }
    const auto values = optimal_values(mdp, k);
    idx[k] = find_member(fc.members, from_value_tables(values), 1e-9);
    optimal_v1[k] = values.v_star[0][mdp.initial_state()];
  }
  return idx;
}

void finish(RunResult& result) {
  double cum = 0.0;
  result.cum_regret.clear();
  for (auto& e : result.episodes) {
    cum += e.regret_increment;
    result.cum_regret.push_back(cum);
    if (!e.qstar_in_set) result.qstar_always_in_set = false;
    if (!e.optimism_holds) ++result.optimism_violations;
  }
  result.total_regret = cum;
}

}  // namespace

std::string to_string(Feedback f) {
  return f == Feedback::kFullInformation ? "full_information" : "bandit";
}

std::string to_string(VariationOracle v) {
  return v == VariationOracle::kExactFromEnv ? "exact_from_env" : "zero";
}

Feedback feedback_from_string(const std::string& name) {
  if (name == "full_information") return Feedback::kFullInformation;
  if (name == "bandit") return Feedback::kBandit;
  throw std::invalid_argument("unknown feedback mode: " + name);
}

VariationOracle variation_oracle_from_string(const std::string& name) {
  if (name == "exact_from_env") return VariationOracle::kExactFromEnv;
  if (name == "zero") return VariationOracle::kZero;
  throw std::invalid_argument("unknown variation oracle: " + name);
}

void SlidingWindowDataset::add(const Trajectory& trajectory) {
  if (static_cast<int>(trajectory.steps.size()) != horizon()) {
    throw std::invalid_argument("trajectory length differs from the horizon");
  }
  if (!steps_.front().empty() && steps_.front().back().episode >= trajectory.episode) {
    throw std::invalid_argument("episodes must be added in increasing order");
  }
  for (int h = 0; h < horizon(); ++h) {
    const auto& st = trajectory.steps[h];
    steps_[h].push_back({trajectory.episode, st.state, st.action, st.next_state, st.reward});
  }
}

void SlidingWindowDataset::clear() {
  for (auto& s : steps_) s.clear();
}

std::span<const Transition> SlidingWindowDataset::window(int h, int k, std::optional<int> w) const {
  if (w && *w < 0) throw std::invalid_argument("window must be nonnegative");
  const auto& v = steps_.at(h);
  const int first = w ? std::max(0, k - *w) : 0;
  auto lo = std::lower_bound(v.begin(), v.end(), first,
                             [](const Transition& t, int e) { return t.episode < e; });
  auto hi = std::upper_bound(v.begin(), v.end(), k,
                             [](int e, const Transition& t) { return e < t.episode; });
  if (hi < lo) hi = lo;
  return {lo, hi};
}

double sw_bellman_loss(const StepTable& xi, std::span<const double> next_values,
                       std::span<const Transition> data, const StepTable* reward_fn) {
  double loss = 0.0;
  for (const auto& t : data) {
    const double rho = reward_fn != nullptr ? (*reward_fn)(t.state, t.action) : t.reward;
    const double r = xi(t.state, t.action) - rho - next_values[t.next_state];
    loss += r * r;
  }
  return loss;
}

double beta_from_constant(double c, int horizon, int n_episodes, std::size_t aux_size,
                          double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in (0, 1]");
  if (!(c > 0.0)) throw std::invalid_argument("c must be positive");
  return c * horizon * horizon *
         std::log(static_cast<double>(n_episodes) * horizon * static_cast<double>(aux_size) / delta);
}

double resolve_beta(const AgentConfig& config, int horizon, int n_episodes, std::size_t aux_size) {
  if (config.beta) {
    if (!(*config.beta >= 0.0)) throw std::invalid_argument("beta must be nonnegative");
    return *config.beta;
  }
  return beta_from_constant(config.c, horizon, n_episodes, aux_size, config.delta);
}

ConfidenceSet update_confidence_set(const FunctionClass& fc, const SlidingWindowDataset& data,
                                    int k, const AgentConfig& config, double beta,
                                    const NonstationaryMdp& mdp, int data_start) {
  check_class_shape(fc);
  if (config.window && *config.window < 1) throw std::invalid_argument("window must be >= 1");
  return confidence_set(fc, aux_components(fc), data, k, config, beta, mdp, data_start);
}

Selection optimistic_select(std::span<const int> candidates, const FunctionClass& fc,
                            int initial_state, int episode) {
  if (candidates.empty()) throw EmptyConfidenceSet(episode);
  Selection best;
  for (int i : candidates) {
    const double v = fc.members.at(i).steps.front().max_value(initial_state);
    if (best.member < 0 || v > best.value || (v == best.value && i < best.member)) {
      best.member = i;
      best.value = v;
    }
  }
  best.policy = greedy_policy(fc.members[best.member]);
  return best;
}

double RunResult::mean_conf_set_size() const {
  if (episodes.empty()) return 0.0;
  double s = 0.0;
  for (const auto& e : episodes) s += e.conf_set_size;
  return s / static_cast<double>(episodes.size());
}

RunResult run_swopea(const NonstationaryMdp& mdp, const FunctionClass& fc,
                     const AgentConfig& config, Rng& rng) {
  check_class_shape(fc);
  if (!(fc.dims == mdp.dims())) throw std::invalid_argument("class and MDP shapes differ");
  if (config.window && *config.window < 1) throw std::invalid_argument("window must be >= 1");
  if (config.restart_period < 0) throw std::invalid_argument("restart period must be >= 0");
  const int K = mdp.n_episodes();
  const int x1 = mdp.initial_state();

  RunResult result;
  result.algorithm = "swopea";
  result.beta = resolve_beta(config, mdp.horizon(), K, fc.aux_members.size());
  result.window = config.window ? *config.window : -1;
  result.feedback = config.feedback;

  const auto aux = aux_components(fc);
  std::vector<double> v_star;
  const auto qstar = qstar_members(mdp, fc, v_star);

  std::vector<int> all(fc.members.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  std::vector<int> played = all;
  SlidingWindowDataset data(mdp.horizon());
  int data_start = 0;

  for (int k = 0; k < K; ++k) {
    if (config.restart_period > 0 && k > 0 && k % config.restart_period == 0) {
      data.clear();
      played = all;
      data_start = k;
    }
    Selection sel = optimistic_select(played, fc, x1, k);
    EpisodeRecord rec;
    rec.episode = k;
    rec.member = sel.member;
    rec.optimistic_value = sel.value;
    const int prev = std::max(k - 1, 0);
    if (contains(played, qstar[prev])) rec.optimism_holds = sel.value >= v_star[prev] - 1e-12;

    rec.trajectory = sample_episode(mdp, k, sel.policy, rng);
    data.add(rec.trajectory);
    ConfidenceSet next = confidence_set(fc, aux, data, k, config, result.beta, mdp, data_start);

    rec.conf_set_size = static_cast<int>(next.members.size());
    rec.qstar_in_set = contains(next.members, qstar[k]);
    rec.optimal_value = v_star[k];
    rec.regret_increment = v_star[k] - evaluate_policy(mdp, k, sel.policy);
    result.policies.push_back(std::move(sel.policy));
    result.episodes.push_back(std::move(rec));
    played = std::move(next.members);
  }
  finish(result);
  return result;
}

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kFullWindow: return "full_window";
    case BaselineKind::kRestart: return "restart";
    case BaselineKind::kOracle: return "oracle";
    case BaselineKind::kStationaryGreedy: return "stationary_greedy";
  }
  return "unknown";
}

BaselineKind baseline_from_string(const std::string& name) {
  if (name == "full_window") return BaselineKind::kFullWindow;
  if (name == "restart") return BaselineKind::kRestart;
  if (name == "oracle") return BaselineKind::kOracle;
  if (name == "stationary_greedy") return BaselineKind::kStationaryGreedy;
  throw std::invalid_argument("unknown baseline: " + name);
}

RunResult run_baseline(const NonstationaryMdp& mdp, const FunctionClass& fc, BaselineKind kind,
                       const AgentConfig& config, Rng& rng) {
  AgentConfig cfg = config;
  RunResult result;
  switch (kind) {
    case BaselineKind::kFullWindow:
      cfg.window.reset();
      cfg.restart_period = 0;
      result = run_swopea(mdp, fc, cfg, rng);
      break;
    case BaselineKind::kRestart:
      if (cfg.restart_period < 1) throw std::invalid_argument("restart needs a period >= 1");
      cfg.window.reset();
      result = run_swopea(mdp, fc, cfg, rng);
      break;
    case BaselineKind::kStationaryGreedy:
      cfg.unconstrained = true;
      result = run_swopea(mdp, fc, cfg, rng);
      break;
    case BaselineKind::kOracle: {
      std::vector<double> v_star;
      const auto qstar = qstar_members(mdp, fc, v_star);
      for (int k = 0; k < mdp.n_episodes(); ++k) {
        const auto values = optimal_values(mdp, k);
        Policy pi = optimal_policy(values);
        EpisodeRecord rec;
        rec.episode = k;
        rec.member = qstar[k];
        rec.optimistic_value = v_star[k];
        rec.optimal_value = v_star[k];
        rec.regret_increment = v_star[k] - evaluate_policy(mdp, k, pi);
        rec.conf_set_size = static_cast<int>(fc.members.size());
        rec.qstar_in_set = qstar[k] >= 0;
        rec.trajectory = sample_episode(mdp, k, pi, rng);
        result.policies.push_back(std::move(pi));
        result.episodes.push_back(std::move(rec));
      }
      result.feedback = cfg.feedback;
      finish(result);
      break;
    }
  }
  result.algorithm = to_string(kind);
  return result;
}

int choose_window(double L, double L_theta, int horizon, int n_episodes, int d, double log_card_G,
                  Feedback feedback) {
  if (horizon < 1 || n_episodes < 1 || d < 1) throw std::invalid_argument("H, K and d must be >= 1");
  if (L < 0.0 || L_theta < 0.0 || log_card_G < 0.0) {
    throw std::invalid_argument("variation and log|G| must be nonnegative");
  }
  const double sqrt_d = std::sqrt(static_cast<double>(d));
  double drift = std::sqrt(L);
  if (feedback == Feedback::kBandit) drift += std::sqrt(L_theta) / std::sqrt(static_cast<double>(horizon));
  const double root_log = std::sqrt(log_card_G);
  const double threshold = (root_log - 1.0 / (horizon * sqrt_d)) / n_episodes;
  if (!(drift > threshold)) return n_episodes;
  const double denom = drift + 1.0 / (static_cast<double>(horizon) * n_episodes * sqrt_d);
  const double w = std::ceil(root_log / denom);
  return static_cast<int>(std::clamp(w, 1.0, static_cast<double>(n_episodes)));
}

}  // namespace swopea
