#include "swopea/drift.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

namespace swopea {

namespace {

using EpisodePtr = std::shared_ptr<const EpisodeModel>;

void check_same_shape(const EpisodeModel& a, const EpisodeModel& b) {
  if (!(a.dims() == b.dims())) throw std::invalid_argument("snapshot shapes differ");
}

void check_schedule(std::span<const double> schedule) {
  if (schedule.size() < 2) throw std::invalid_argument("schedule needs at least two episodes");
  if (schedule.front() != 0.0 || schedule.back() != 1.0) {
    throw std::invalid_argument("schedule must start at 0 and end at 1");
  }
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    if (!(schedule[i] >= schedule[i - 1])) throw std::invalid_argument("non-monotone schedule");
  }
}

EpisodeModel mix(const EpisodeModel& base, const EpisodeModel& target, double lambda,
                 bool transitions, bool rewards) {
  if (lambda == 0.0) return base;
  std::vector<double> p = base.transitions();
  std::vector<double> r = base.rewards();
  if (transitions) {
    const auto& pt = target.transitions();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = (1.0 - lambda) * p[i] + lambda * pt[i];
  }
  if (rewards) {
    const auto& rt = target.rewards();
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = (1.0 - lambda) * r[i] + lambda * rt[i];
  }
  return EpisodeModel(base.dims(), std::move(p), std::move(r));
}

NonstationaryMdp mixed_sequence(const EpisodeModel& base, const EpisodeModel& target,
                                int initial_state, std::span<const double> schedule,
                                bool transitions) {
  check_same_shape(base, target);
  check_schedule(schedule);
  std::vector<EpisodePtr> episodes;
  episodes.reserve(schedule.size());
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    if (k > 0 && schedule[k] == schedule[k - 1]) {
      episodes.push_back(episodes.back());
      continue;
    }
    episodes.push_back(std::make_shared<const EpisodeModel>(
        mix(base, target, schedule[k], transitions, true)));
  }
  return NonstationaryMdp(base.dims(), initial_state, std::move(episodes));
}

}  // namespace

std::string to_string(DriftKind kind) {
  switch (kind) {
    case DriftKind::kAbrupt: return "abrupt";
    case DriftKind::kGradual: return "gradual";
    case DriftKind::kRandomWalk: return "random_walk";
    case DriftKind::kRewardOnly: return "reward_only";
  }
  return "unknown";
}

DriftKind drift_kind_from_string(const std::string& name) {
  if (name == "abrupt") return DriftKind::kAbrupt;
  if (name == "gradual") return DriftKind::kGradual;
  if (name == "random_walk") return DriftKind::kRandomWalk;
  if (name == "reward_only") return DriftKind::kRewardOnly;
  throw std::invalid_argument("unknown drift kind: " + name);
}

NonstationaryMdp make_abrupt(const EpisodeModel& base, const EpisodeModel& shifted,
                             int initial_state, int switch_episode, int n_episodes) {
  check_same_shape(base, shifted);
  if (n_episodes <= 0) throw std::invalid_argument("n_episodes must be positive");
  if (switch_episode < 0 || switch_episode >= n_episodes) {
    throw std::invalid_argument("switch episode outside [0, K)");
  }
  auto b = std::make_shared<const EpisodeModel>(base);
  auto s = base == shifted ? b : std::make_shared<const EpisodeModel>(shifted);
  std::vector<EpisodePtr> episodes(n_episodes);
  for (int k = 0; k < n_episodes; ++k) episodes[k] = k < switch_episode ? b : s;
  return NonstationaryMdp(base.dims(), initial_state, std::move(episodes));
}

std::vector<double> linear_schedule(int n_episodes) {
  if (n_episodes <= 0) throw std::invalid_argument("n_episodes must be positive");
  std::vector<double> s(n_episodes, 0.0);
  for (int k = 1; k < n_episodes; ++k) s[k] = static_cast<double>(k) / (n_episodes - 1);
  return s;
}

NonstationaryMdp make_gradual(const EpisodeModel& base, const EpisodeModel& target,
                              int initial_state, std::span<const double> schedule) {
  return mixed_sequence(base, target, initial_state, schedule, true);
}

NonstationaryMdp make_reward_drift(const EpisodeModel& base, const EpisodeModel& target,
                                   int initial_state, std::span<const double> schedule) {
  return mixed_sequence(base, target, initial_state, schedule, false);
}

std::vector<double> project_to_simplex(std::span<const double> v) {
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    css += u[j];
    const double t = (css - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) tau = t;
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - tau, 0.0);
  // Normalize the rounding residue so rows pass the 1e-12 sum check.
  const double sum = std::accumulate(out.begin(), out.end(), 0.0);
  if (sum > 0.0 && std::abs(sum - 1.0) > 1e-15) {
    for (double& x : out) x /= sum;
  }
  return out;
}

RandomWalkResult make_random_walk(const EpisodeModel& base, int initial_state, int n_episodes,
                                  double per_step_l1, Rng& rng, std::span<const RowRef> affected) {
  if (n_episodes <= 0) throw std::invalid_argument("n_episodes must be positive");
  if (!(per_step_l1 >= 0.0 && per_step_l1 <= 2.0)) {
    throw std::invalid_argument("per_step_l1 must lie in [0, 2]");
  }
  const Dims& d = base.dims();
  std::vector<RowRef> rows(affected.begin(), affected.end());
  if (rows.empty()) {
    for (int h = 0; h < d.horizon; ++h)
      for (int s = 0; s < d.n_states; ++s)
        for (int a = 0; a < d.n_actions; ++a) rows.push_back({h, s, a});
  }

  std::vector<EpisodePtr> episodes;
  episodes.reserve(n_episodes);
  episodes.push_back(std::make_shared<const EpisodeModel>(base));
  std::vector<double> realized(n_episodes, 0.0);
  if (per_step_l1 == 0.0) {
    for (int k = 1; k < n_episodes; ++k) episodes.push_back(episodes.front());
    return {NonstationaryMdp(d, initial_state, std::move(episodes)), std::move(realized)};
  }

  std::vector<double> dir(d.n_states);
  std::vector<double> moved(d.n_states);
  for (int k = 1; k < n_episodes; ++k) {
    EpisodeModel next = *episodes.back();
    double worst = 0.0;
    for (const RowRef& ref : rows) {
      auto row = next.mutable_row(ref.step, ref.state, ref.action);
      double mean = 0.0;
      for (auto& x : dir) {
        x = rng.normal();
        mean += x;
      }
      mean /= static_cast<double>(dir.size());
      double l1 = 0.0;
      for (auto& x : dir) {
        x -= mean;
        l1 += std::abs(x);
      }
      if (l1 == 0.0) continue;
      for (std::size_t i = 0; i < dir.size(); ++i) moved[i] = row[i] + dir[i] * per_step_l1 / l1;
      auto projected = project_to_simplex(moved);
      double dist = 0.0;
      for (std::size_t i = 0; i < projected.size(); ++i) {
        dist += std::abs(projected[i] - row[i]);
        row[i] = projected[i];
      }
      worst = std::max(worst, dist);
    }
    realized[k] = worst;
    episodes.push_back(std::make_shared<const EpisodeModel>(std::move(next)));
  }
  return {NonstationaryMdp(d, initial_state, std::move(episodes)), std::move(realized)};
}

NonstationaryMdp generate_drift(const DriftSpec& spec, const EpisodeModel& base, int initial_state,
                                Rng& rng) {
  auto need_target = [&]() -> const EpisodeModel& {
    if (!spec.target) throw std::invalid_argument(to_string(spec.kind) + " drift needs a target");
    return *spec.target;
  };
  switch (spec.kind) {
    case DriftKind::kAbrupt:
      return make_abrupt(base, need_target(), initial_state, spec.switch_episode,
                         spec.n_episodes);
    case DriftKind::kGradual: {
      auto sched = linear_schedule(spec.n_episodes);
      return make_gradual(base, need_target(), initial_state, sched);
    }
    case DriftKind::kRewardOnly: {
      auto sched = linear_schedule(spec.n_episodes);
      return make_reward_drift(base, need_target(), initial_state, sched);
    }
    case DriftKind::kRandomWalk: {
      std::span<const RowRef> rows;
      if (spec.affected) rows = *spec.affected;
      return make_random_walk(base, initial_state, spec.n_episodes, spec.per_step_l1, rng, rows)
          .mdp;
    }
  }
  throw std::invalid_argument("unknown drift kind");
}

EpisodeModel random_episode_model(Dims dims, Rng& rng, int support) {
  EpisodeModel m(dims);
  const int n = dims.n_states;
  const int width = support <= 0 ? n : std::min(support, n);
  std::vector<int> states(n);
  for (int h = 0; h < dims.horizon; ++h) {
    for (int s = 0; s < n; ++s) {
      for (int a = 0; a < dims.n_actions; ++a) {
        std::iota(states.begin(), states.end(), 0);
        // Partial Fisher-Yates picks the support.
        for (int i = 0; i < width; ++i) std::swap(states[i], states[i + rng.uniform_int(n - i)]);
        auto row = m.mutable_row(h, s, a);
        double total = 0.0;
        for (int i = 0; i < width; ++i) {
          double u = rng.uniform();
          while (u <= 0.0) u = rng.uniform();
          row[states[i]] = -std::log(u);
          total += row[states[i]];
        }
        for (int i = 0; i < width; ++i) row[states[i]] /= total;
        double sum = 0.0;
        for (double p : row) sum += p;
        row[states[0]] += 1.0 - sum;
        m.mutable_reward(h, s, a) = rng.uniform();
      }
    }
  }
  return m;
}

}  // namespace swopea
