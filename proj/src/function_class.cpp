#include "swopea/function_class.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace swopea {

namespace {

constexpr double kDedupTol = 1e-12;

void check_next(const Dims& d, std::span<const double> next_values) {
  if (static_cast<int>(next_values.size()) != d.n_states) {
    throw std::invalid_argument("next-step values have wrong length");
  }
}

/// Deduplicating container keyed by a quantized hash; exact comparison at
/// kDedupTol inside a bucket.
class UniqueTuples {
 public:
  explicit UniqueTuples(std::vector<QFunction>& store) : store_(store) {
    for (std::size_t i = 0; i < store_.size(); ++i) buckets_[key(store_[i])].push_back(i);
  }

  /// Returns true when inserted.
  bool insert(QFunction f) {
    auto& bucket = buckets_[key(f)];
    for (std::size_t i : bucket) {
      if (max_abs_diff(store_[i], f) <= kDedupTol) return false;
    }
    bucket.push_back(store_.size());
    store_.push_back(std::move(f));
    return true;
  }

 private:
  static std::uint64_t key(const QFunction& f) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& t : f.steps) {
      for (double x : t.values()) {
        const auto q = static_cast<std::int64_t>(std::llround(x * 1e9));
        h = (h ^ static_cast<std::uint64_t>(q)) * 0x100000001b3ULL;
      }
    }
    return h;
  }

  std::vector<QFunction>& store_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

}  // namespace

std::vector<double> QFunction::next_state_values(int h) const {
  if (h + 1 < horizon()) return steps[h + 1].state_values();
  return std::vector<double>(static_cast<std::size_t>(steps.front().n_states()), 0.0);
}

double max_abs_diff(const QFunction& a, const QFunction& b) {
  if (a.horizon() != b.horizon()) throw std::invalid_argument("horizon mismatch");
  double d = 0.0;
  for (int h = 0; h < a.horizon(); ++h) d = std::max(d, max_abs_diff(a.steps[h], b.steps[h]));
  return d;
}

Policy greedy_policy(const QFunction& f) {
  const int n_states = f.steps.front().n_states();
  Policy p(f.horizon(), n_states);
  for (int h = 0; h < f.horizon(); ++h)
    for (int s = 0; s < n_states; ++s) p(h, s) = f.steps[h].greedy_action(s);
  return p;
}

QFunction from_value_tables(const ValueTables& values) { return QFunction{values.q_star}; }

std::vector<StepTable> FunctionClass::aux_step(int h) const {
  std::vector<StepTable> out;
  for (const auto& g : aux_members) {
    const StepTable& t = g.steps.at(h);
    bool dup = false;
    for (const auto& o : out) {
      if (max_abs_diff(o, t) <= kDedupTol) {
        dup = true;
        break;
      }
    }
    if (!dup) out.push_back(t);
  }
  return out;
}

void check_class_shape(const FunctionClass& fc) {
  if (fc.members.empty()) throw std::invalid_argument("function class is empty");
  auto check = [&](const QFunction& f) {
    if (f.horizon() != fc.dims.horizon) throw std::invalid_argument("member horizon mismatch");
    for (const auto& t : f.steps) {
      if (t.n_states() != fc.dims.n_states || t.n_actions() != fc.dims.n_actions) {
        throw std::invalid_argument("member table shape mismatch");
      }
    }
  };
  for (const auto& f : fc.members) check(f);
  for (const auto& g : fc.aux_members) check(g);
}

StepTable bellman_apply(const EpisodeModel& model, int h, std::span<const double> next_values) {
  const Dims& d = model.dims();
  if (h < 0 || h >= d.horizon) throw std::out_of_range("step index out of range");
  check_next(d, next_values);
  const bool last = h + 1 == d.horizon;
  if (last && std::any_of(next_values.begin(), next_values.end(), [](double v) { return v != 0.0; })) {
    throw std::invalid_argument("f_{H+1} must be identically zero");
  }
  StepTable out(d.n_states, d.n_actions);
  for (int s = 0; s < d.n_states; ++s) {
    for (int a = 0; a < d.n_actions; ++a) {
      double q = model.reward(h, s, a);
      if (!last) {
        auto row = model.row(h, s, a);
        for (int s2 = 0; s2 < d.n_states; ++s2) q += row[s2] * next_values[s2];
      }
      out(s, a) = q;
    }
  }
  return out;
}

StepTable bellman_apply(const NonstationaryMdp& mdp, int k, int h, const StepTable& f_next) {
  if (f_next.n_states() != mdp.n_states() || f_next.n_actions() != mdp.n_actions()) {
    throw std::invalid_argument("f_next shape mismatch");
  }
  const auto next = f_next.state_values();
  return bellman_apply(mdp.episode(k), h, next);
}

StepTable bellman_apply(const NonstationaryMdp& mdp, int k, int h) {
  const std::vector<double> zeros(mdp.n_states(), 0.0);
  return bellman_apply(mdp.episode(k), h, zeros);
}

StepTable bellman_residual(const EpisodeModel& model, int h, const QFunction& f) {
  StepTable r = bellman_apply(model, h, f.next_state_values(h));
  std::span<double> out = r.values();
  std::span<const double> fv = f.steps.at(h).values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fv[i] - out[i];
  return r;
}

RealizabilityReport check_realizability(const FunctionClass& fc, const NonstationaryMdp& mdp,
                                        double tol) {
  check_class_shape(fc);
  RealizabilityReport report;
  report.gap_per_episode.resize(mdp.n_episodes());
  report.matching_member.resize(mdp.n_episodes());
  const auto reps = mdp.distinct_episode_map();
  for (int k = 0; k < mdp.n_episodes(); ++k) {
    if (reps[k] != k) {
      report.gap_per_episode[k] = report.gap_per_episode[reps[k]];
      report.matching_member[k] = report.matching_member[reps[k]];
      continue;
    }
    const QFunction q_star = from_value_tables(optimal_values(mdp, k));
    double best = std::numeric_limits<double>::infinity();
    int best_idx = -1;
    for (std::size_t i = 0; i < fc.members.size(); ++i) {
      const double gap = max_abs_diff(fc.members[i], q_star);
      if (gap < best) {
        best = gap;
        best_idx = static_cast<int>(i);
      }
    }
    report.gap_per_episode[k] = best;
    report.matching_member[k] = best_idx;
  }
  for (double g : report.gap_per_episode) {
    report.worst_gap = std::max(report.worst_gap, g);
    if (!(g <= tol)) report.passed = false;
  }
  return report;
}

CompletenessReport check_completeness(const FunctionClass& fc, const NonstationaryMdp& mdp,
                                      double tol) {
  check_class_shape(fc);
  CompletenessReport report;
  const auto reps = mdp.distinct_episode_map();
  std::vector<std::vector<StepTable>> aux(mdp.horizon());
  for (int h = 0; h < mdp.horizon(); ++h) aux[h] = fc.aux_step(h);
  for (int k = 0; k < mdp.n_episodes(); ++k) {
    if (reps[k] != k) continue;
    const EpisodeModel& model = mdp.episode(k);
    for (int h = 0; h < mdp.horizon(); ++h) {
      for (std::size_t i = 0; i < fc.members.size(); ++i) {
        const StepTable backup = bellman_apply(model, h, fc.members[i].next_state_values(h));
        double nearest = std::numeric_limits<double>::infinity();
        for (const auto& g : aux[h]) nearest = std::min(nearest, max_abs_diff(backup, g));
        if (report.worst_episode < 0 || nearest > report.worst_violation) {
          report.worst_violation = nearest;
          report.worst_episode = k;
          report.worst_step = h;
          report.worst_member = static_cast<int>(i);
        }
      }
    }
  }
  report.passed = report.worst_violation <= tol;
  return report;
}

int find_member(const std::vector<QFunction>& members, const QFunction& target, double tol) {
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (max_abs_diff(members[i], target) <= tol) return static_cast<int>(i);
  }
  return -1;
}

int insert_unique(std::vector<QFunction>& members, QFunction f) {
  const int idx = find_member(members, f, kDedupTol);
  if (idx >= 0) return idx;
  members.push_back(std::move(f));
  return static_cast<int>(members.size()) - 1;
}

FunctionClass build_realizable_class(const NonstationaryMdp& mdp, const ClassBuildOptions& options,
                                     Rng& rng) {
  if (options.perturb_scale < 0.0) throw std::invalid_argument("perturb_scale must be >= 0");
  if (options.n_distractors < 0) throw std::invalid_argument("n_distractors must be >= 0");
  const Dims& d = mdp.dims();
  FunctionClass fc;
  fc.dims = d;
  const auto reps = mdp.distinct_episode_map();

  UniqueTuples members(fc.members);
  for (int k = 0; k < mdp.n_episodes(); ++k) {
    if (reps[k] != k) continue;
    members.insert(from_value_tables(optimal_values(mdp, k)));
  }
  const std::size_t n_optimal = fc.members.size();
  for (int i = 0; i < options.n_distractors; ++i) {
    QFunction f = fc.members[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(n_optimal)))];
    for (int h = 0; h < d.horizon; ++h) {
      const double hi = d.horizon - h;
      for (double& x : f.steps[h].values()) {
        x = std::clamp(x + rng.uniform(-options.perturb_scale, options.perturb_scale), 0.0, hi);
      }
    }
    members.insert(std::move(f));
  }

  fc.aux_members = fc.members;
  if (options.closure) {
    UniqueTuples aux(fc.aux_members);
    for (const auto& f : fc.members) {
      for (int k = 0; k < mdp.n_episodes(); ++k) {
        if (reps[k] != k) continue;
        const EpisodeModel& model = mdp.episode(k);
        QFunction backup;
        backup.steps.reserve(d.horizon);
        for (int h = 0; h < d.horizon; ++h) {
          StepTable t = bellman_apply(model, h, f.next_state_values(h));
          const double hi = d.horizon - h;
          for (double& x : t.values()) {
            const double c = std::clamp(x, 0.0, hi);
            if (c != x) fc.clipped_backups = true;
            x = c;
          }
          backup.steps.push_back(std::move(t));
        }
        aux.insert(std::move(backup));
      }
    }
  }
  fc.provenance = "build_realizable_class(n_distractors=" + std::to_string(options.n_distractors) +
                  ", perturb_scale=" + std::to_string(options.perturb_scale) +
                  ", closure=" + (options.closure ? "true" : "false") + ")";
  return fc;
}

}  // namespace swopea
