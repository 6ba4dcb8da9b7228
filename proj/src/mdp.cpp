#include "swopea/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace swopea {

namespace {

void check_dims(const Dims& d) {
  if (d.n_states <= 0 || d.n_actions <= 0 || d.horizon <= 0) {
    throw std::invalid_argument("dimensions must be positive");
  }
}

std::size_t transition_size(const Dims& d) {
  return static_cast<std::size_t>(d.horizon) * d.state_actions() * d.n_states;
}

std::size_t reward_size(const Dims& d) {
  return static_cast<std::size_t>(d.horizon) * d.state_actions();
}

void check_episode(const NonstationaryMdp& mdp, int k) {
  if (k < 0 || k >= mdp.n_episodes()) {
    throw std::out_of_range("episode index " + std::to_string(k) + " outside [0, " +
                            std::to_string(mdp.n_episodes()) + ")");
  }
}

void check_policy(const Dims& d, const Policy& policy) {
  if (policy.horizon() != d.horizon || policy.n_states() != d.n_states) {
    throw std::invalid_argument("policy shape does not match the MDP");
  }
  for (int a : policy.actions()) {
    if (a < 0 || a >= d.n_actions) throw std::out_of_range("policy action index out of range");
  }
}

}  // namespace

EpisodeModel::EpisodeModel(Dims dims, std::vector<double> transitions, std::vector<double> rewards)
    : dims_(dims), transitions_(std::move(transitions)), rewards_(std::move(rewards)) {
  check_dims(dims_);
  if (transitions_.size() != transition_size(dims_)) {
    throw std::invalid_argument("transition table has wrong size");
  }
  if (rewards_.size() != reward_size(dims_)) {
    throw std::invalid_argument("reward table has wrong size");
  }
}

EpisodeModel::EpisodeModel(Dims dims)
    : EpisodeModel(dims, std::vector<double>(transition_size(dims)),
                   std::vector<double>(reward_size(dims))) {}

StepTable EpisodeModel::reward_table(int h) const {
  StepTable t(dims_.n_states, dims_.n_actions);
  for (int s = 0; s < dims_.n_states; ++s)
    for (int a = 0; a < dims_.n_actions; ++a) t(s, a) = reward(h, s, a);
  return t;
}

NonstationaryMdp::NonstationaryMdp(Dims dims, int initial_state,
                                   std::vector<std::shared_ptr<const EpisodeModel>> episodes)
    : dims_(dims), initial_state_(initial_state), episodes_(std::move(episodes)) {
  check_dims(dims_);
  if (episodes_.empty()) throw std::invalid_argument("at least one episode is required");
  for (const auto& e : episodes_) {
    if (!e) throw std::invalid_argument("null episode model");
    if (!(e->dims() == dims_)) throw std::invalid_argument("episode dimensions do not match");
  }
}

NonstationaryMdp NonstationaryMdp::stationary(EpisodeModel model, int initial_state,
                                              int n_episodes) {
  if (n_episodes <= 0) throw std::invalid_argument("n_episodes must be positive");
  auto shared = std::make_shared<const EpisodeModel>(std::move(model));
  const Dims dims = shared->dims();
  return NonstationaryMdp(dims, initial_state,
                          std::vector<std::shared_ptr<const EpisodeModel>>(n_episodes, shared));
}

const EpisodeModel& NonstationaryMdp::episode(int k) const { return *episode_ptr(k); }

const std::shared_ptr<const EpisodeModel>& NonstationaryMdp::episode_ptr(int k) const {
  check_episode(*this, k);
  return episodes_[k];
}

NonstationaryMdp NonstationaryMdp::snapshot(int k) const {
  return NonstationaryMdp(dims_, initial_state_, {episode_ptr(k)});
}

std::vector<int> NonstationaryMdp::distinct_episode_map() const {
  std::vector<int> map(episodes_.size());
  std::vector<int> reps;
  for (std::size_t k = 0; k < episodes_.size(); ++k) {
    int found = -1;
    for (int r : reps) {
      if (episodes_[r] == episodes_[k] || *episodes_[r] == *episodes_[k]) {
        found = r;
        break;
      }
    }
    if (found < 0) {
      found = static_cast<int>(k);
      reps.push_back(found);
    }
    map[k] = found;
  }
  return map;
}

ValidationReport validate(const NonstationaryMdp& mdp) {
  ValidationReport report;
  const Dims& d = mdp.dims();
  if (mdp.initial_state() < 0 || mdp.initial_state() >= d.n_states) {
    report.violations.push_back({-1, -1, mdp.initial_state(), -1, "initial_state",
                                 static_cast<double>(mdp.initial_state()),
                                 "initial state outside the state space"});
  }
  const auto reps = mdp.distinct_episode_map();
  for (int k = 0; k < mdp.n_episodes(); ++k) {
    if (reps[k] != k) continue;  // identical content already checked
    const EpisodeModel& m = mdp.episode(k);
    for (int h = 0; h < d.horizon; ++h) {
      for (int s = 0; s < d.n_states; ++s) {
        for (int a = 0; a < d.n_actions; ++a) {
          double sum = 0.0;
          for (double p : m.row(h, s, a)) {
            sum += p;
            if (p < 0.0 || !std::isfinite(p)) {
              report.violations.push_back({k, h, s, a, "negative_probability", p,
                                           "transition entry is negative or not finite"});
            }
          }
          if (!(std::abs(sum - 1.0) <= 1e-12)) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "row sum " << sum << " != 1";
            report.violations.push_back({k, h, s, a, "row_sum", sum, msg.str()});
          }
          const double r = m.reward(h, s, a);
          if (!(r >= 0.0 && r <= 1.0)) {
            report.violations.push_back({k, h, s, a, "reward_range", r, "reward out of [0,1]"});
          }
        }
      }
    }
  }
  return report;
}

ValueTables optimal_values(const EpisodeModel& model) {
  const Dims& d = model.dims();
  ValueTables out;
  out.q_star.assign(d.horizon, StepTable(d.n_states, d.n_actions));
  out.v_star.assign(d.horizon + 1, std::vector<double>(d.n_states, 0.0));
  for (int h = d.horizon - 1; h >= 0; --h) {
    const auto& v_next = out.v_star[h + 1];
    for (int s = 0; s < d.n_states; ++s) {
      for (int a = 0; a < d.n_actions; ++a) {
        double q = model.reward(h, s, a);
        if (h + 1 < d.horizon) {
          auto row = model.row(h, s, a);
          for (int s2 = 0; s2 < d.n_states; ++s2) q += row[s2] * v_next[s2];
        }
        out.q_star[h](s, a) = q;
      }
      out.v_star[h][s] = out.q_star[h].max_value(s);
    }
  }
  return out;
}

ValueTables optimal_values(const NonstationaryMdp& mdp, int k) {
  ValueTables v = optimal_values(mdp.episode(k));
  v.episode = k;
  return v;
}

Policy optimal_policy(const ValueTables& values) {
  const int horizon = static_cast<int>(values.q_star.size());
  const int n_states = values.q_star.front().n_states();
  Policy p(horizon, n_states);
  for (int h = 0; h < horizon; ++h)
    for (int s = 0; s < n_states; ++s) p(h, s) = values.q_star[h].greedy_action(s);
  return p;
}

double evaluate_policy(const NonstationaryMdp& mdp, int k, const Policy& policy) {
  const EpisodeModel& m = mdp.episode(k);
  const Dims& d = mdp.dims();
  check_policy(d, policy);
  std::vector<double> v_next(d.n_states, 0.0);
  std::vector<double> v(d.n_states);
  for (int h = d.horizon - 1; h >= 0; --h) {
    for (int s = 0; s < d.n_states; ++s) {
      const int a = policy(h, s);
      double q = m.reward(h, s, a);
      if (h + 1 < d.horizon) {
        auto row = m.row(h, s, a);
        for (int s2 = 0; s2 < d.n_states; ++s2) q += row[s2] * v_next[s2];
      }
      v[s] = q;
    }
    std::swap(v, v_next);
  }
  return v_next[mdp.initial_state()];
}

Trajectory sample_episode(const NonstationaryMdp& mdp, int k, const Policy& policy, Rng& rng) {
  const EpisodeModel& m = mdp.episode(k);
  const Dims& d = mdp.dims();
  check_policy(d, policy);
  Trajectory traj;
  traj.episode = k;
  traj.steps.reserve(d.horizon);
  int x = mdp.initial_state();
  for (int h = 0; h < d.horizon; ++h) {
    const int a = policy(h, x);
    const int next = rng.categorical(m.row(h, x, a));
    traj.steps.push_back({x, a, m.reward(h, x, a), next});
    x = next;
  }
  return traj;
}

RegretReport dynamic_regret(const NonstationaryMdp& mdp, std::span<const Policy> policies) {
  if (static_cast<int>(policies.size()) != mdp.n_episodes()) {
    throw std::invalid_argument("expected one policy per episode");
  }
  RegretReport out;
  out.increments.reserve(policies.size());
  const auto reps = mdp.distinct_episode_map();
  std::vector<double> v_star_cache(mdp.n_episodes(), -1.0);
  for (int k = 0; k < mdp.n_episodes(); ++k) {
    double& v_star = v_star_cache[reps[k]];
    if (v_star < 0.0) v_star = optimal_values(mdp, k).v_star[0][mdp.initial_state()];
    const double inc = v_star - evaluate_policy(mdp, k, policies[k]);
    out.increments.push_back(inc);
    out.total += inc;
  }
  return out;
}

double transition_distance(const EpisodeModel& a, const EpisodeModel& b, int h) {
  const Dims& d = a.dims();
  double sup = 0.0;
  for (int s = 0; s < d.n_states; ++s) {
    for (int act = 0; act < d.n_actions; ++act) {
      auto ra = a.row(h, s, act);
      auto rb = b.row(h, s, act);
      double l1 = 0.0;
      for (int s2 = 0; s2 < d.n_states; ++s2) l1 += std::abs(ra[s2] - rb[s2]);
      sup = std::max(sup, l1);
    }
  }
  return sup;
}

double reward_distance(const EpisodeModel& a, const EpisodeModel& b, int h) {
  const Dims& d = a.dims();
  double sup = 0.0;
  for (int s = 0; s < d.n_states; ++s)
    for (int act = 0; act < d.n_actions; ++act)
      sup = std::max(sup, std::abs(a.reward(h, s, act) - b.reward(h, s, act)));
  return sup;
}

VariationBudgets variation_budgets(const NonstationaryMdp& mdp) {
  VariationBudgets out;
  // k = 0 contributes nothing under the P^0 = P^1 convention.
  for (int k = 1; k < mdp.n_episodes(); ++k) {
    if (mdp.episode_ptr(k) == mdp.episode_ptr(k - 1)) continue;
    const EpisodeModel& cur = mdp.episode(k);
    const EpisodeModel& prev = mdp.episode(k - 1);
    for (int h = 0; h < mdp.horizon(); ++h) {
      out.delta_r += reward_distance(cur, prev, h);
      out.delta_p += transition_distance(cur, prev, h);
    }
  }
  return out;
}

LocalVariation local_variation(const NonstationaryMdp& mdp, int k, int h, int w) {
  check_episode(mdp, k);
  if (h < 0 || h >= mdp.horizon()) throw std::out_of_range("step index out of range");
  if (w < 0) throw std::invalid_argument("window must be nonnegative");
  LocalVariation out;
  const EpisodeModel& cur = mdp.episode(k);
  for (int t = std::max(0, k - w); t < k; ++t) {
    if (mdp.episode_ptr(t) == mdp.episode_ptr(k)) continue;
    const EpisodeModel& past = mdp.episode(t);
    out.delta_p_w += transition_distance(cur, past, h);
    out.delta_r_w += reward_distance(cur, past, h);
  }
  return out;
}

AverageVariation average_variation(const NonstationaryMdp& mdp) {
  AverageVariation out;
  const int n_episodes = mdp.n_episodes();
  if (n_episodes < 2) return out;
  std::vector<double> dp(n_episodes - 1);
  std::vector<double> dr(n_episodes - 1);
  for (int h = 0; h < mdp.horizon(); ++h) {
    for (int s = 0; s + 1 < n_episodes; ++s) {
      if (mdp.episode_ptr(s) == mdp.episode_ptr(s + 1)) {
        dp[s] = dr[s] = 0.0;
        continue;
      }
      dp[s] = transition_distance(mdp.episode(s + 1), mdp.episode(s), h);
      dr[s] = reward_distance(mdp.episode(s + 1), mdp.episode(s), h);
    }
    // max over t < k of mean(d[t..k-1])
    for (int t = 0; t + 1 < n_episodes; ++t) {
      double sp = 0.0;
      double sr = 0.0;
      for (int k = t + 1; k < n_episodes; ++k) {
        sp += dp[k - 1];
        sr += dr[k - 1];
        const double len = k - t;
        out.l = std::max(out.l, sp / len);
        out.l_theta = std::max(out.l_theta, sr / len);
      }
    }
  }
  return out;
}

std::vector<std::vector<double>> state_distributions(const EpisodeModel& model, int initial_state,
                                                     const Policy& policy) {
  const Dims& d = model.dims();
  check_policy(d, policy);
  std::vector<std::vector<double>> dist(d.horizon, std::vector<double>(d.n_states, 0.0));
  dist[0][initial_state] = 1.0;
  for (int h = 0; h + 1 < d.horizon; ++h) {
    for (int s = 0; s < d.n_states; ++s) {
      const double mass = dist[h][s];
      if (mass == 0.0) continue;
      auto row = model.row(h, s, policy(h, s));
      for (int s2 = 0; s2 < d.n_states; ++s2) dist[h + 1][s2] += mass * row[s2];
    }
  }
  return dist;
}

}  // namespace swopea
