#include "swopea/eluder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>

namespace swopea {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kGreedyMaxLength = 100000;

/// |g(pi_i)| and g(pi_i)^2 laid out [g][i].
struct ValueGrid {
  int n_g = 0;
  int n_pi = 0;
  std::vector<double> abs_v;
  std::vector<double> sq;

  ValueGrid(std::span<const ResidualFunction> G, std::span<const PointDistribution> Pi)
      : n_g(static_cast<int>(G.size())), n_pi(static_cast<int>(Pi.size())) {
    abs_v.resize(static_cast<std::size_t>(n_g) * n_pi);
    sq.resize(abs_v.size());
    for (int g = 0; g < n_g; ++g) {
      for (int i = 0; i < n_pi; ++i) {
        const double x = G[g].at(Pi[i]);
        abs_v[idx(g, i)] = std::abs(x);
        sq[idx(g, i)] = x * x;
      }
    }
  }

  [[nodiscard]] std::size_t idx(int g, int i) const {
    return static_cast<std::size_t>(g) * n_pi + i;
  }

  /// Energy of each g for a prefix given by multiplicities, summed in Pi order.
  void energies(const std::vector<int>& counts, std::vector<double>& out) const {
    out.assign(n_g, 0.0);
    for (int g = 0; g < n_g; ++g) {
      double e = 0.0;
      for (int i = 0; i < n_pi; ++i) {
        if (counts[i] != 0) e += counts[i] * sq[idx(g, i)];
      }
      out[g] = e;
    }
  }

  /// Lowest g that makes element i independent under the per-element rule.
  [[nodiscard]] int witness(int i, const std::vector<double>& energy, double eps) const {
    for (int g = 0; g < n_g; ++g) {
      if (abs_v[idx(g, i)] > std::max(eps, std::sqrt(energy[g]))) return g;
    }
    return -1;
  }
};

// Feasible eps' values as a sorted union of disjoint [lo, hi) intervals.
using IntervalSet = std::vector<std::pair<double, double>>;

IntervalSet element_set(const ValueGrid& grid, int i, const std::vector<double>& energy,
                        double eps) {
  IntervalSet parts;
  for (int g = 0; g < grid.n_g; ++g) {
    const double lo = std::max(eps, std::sqrt(energy[g]));
    const double hi = grid.abs_v[grid.idx(g, i)];
    if (lo < hi) parts.emplace_back(lo, hi);
  }
  std::sort(parts.begin(), parts.end());
  IntervalSet merged;
  for (const auto& p : parts) {
    if (!merged.empty() && p.first <= merged.back().second) {
      merged.back().second = std::max(merged.back().second, p.second);
    } else {
      merged.push_back(p);
    }
  }
  return merged;
}

IntervalSet intersect(const IntervalSet& a, const IntervalSet& b) {
  IntervalSet out;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    const double lo = std::max(a[i].first, b[j].first);
    const double hi = std::min(a[i].second, b[j].second);
    if (lo < hi) out.emplace_back(lo, hi);
    if (a[i].second < b[j].second) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

std::string counts_key(const std::vector<int>& counts) {
  std::string key(counts.size(), '\0');
  for (std::size_t i = 0; i < counts.size(); ++i) key[i] = static_cast<char>(counts[i]);
  return key;
}

/// Witnesses for a finished sequence of Pi indices.
std::vector<WitnessedElement> build_witnesses(const ValueGrid& grid,
                                              std::span<const PointDistribution> Pi,
                                              const std::vector<int>& seq, double eps,
                                              EpsRule rule, double shared_eps) {
  std::vector<WitnessedElement> out;
  std::vector<int> counts(grid.n_pi, 0);
  std::vector<double> energy;
  for (int i : seq) {
    grid.energies(counts, energy);
    WitnessedElement el;
    el.nu = Pi[i];
    if (rule == EpsRule::kPerElement) {
      const int g = grid.witness(i, energy, eps);
      el.witness = {g, std::max(eps, std::sqrt(energy[g])), energy[g], grid.abs_v[grid.idx(g, i)]};
    } else {
      for (int g = 0; g < grid.n_g; ++g) {
        if (std::sqrt(energy[g]) <= shared_eps && grid.abs_v[grid.idx(g, i)] > shared_eps) {
          el.witness = {g, shared_eps, energy[g], grid.abs_v[grid.idx(g, i)]};
          break;
        }
      }
    }
    out.push_back(el);
    ++counts[i];
  }
  return out;
}

class ExactSearch {
 public:
  ExactSearch(const ValueGrid& grid, double eps, const EluderOptions& options)
      : grid_(grid), eps_(eps), cap_(options.cap), budget_(options.node_budget) {}

  /// Longest per-element continuation from `counts` (whose total is `depth`).
  int longest(std::vector<int>& counts, int depth) {
    const std::string key = counts_key(counts);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second.first;
    if (out_of_budget()) return 0;
    std::vector<double> energy;
    grid_.energies(counts, energy);
    int best = 0;
    int best_next = -1;
    for (int i = 0; i < grid_.n_pi; ++i) {
      if (grid_.witness(i, energy, eps_) < 0) continue;
      if (depth >= cap_) {
        truncated_ = true;
        break;
      }
      ++counts[i];
      const int r = 1 + longest(counts, depth + 1);
      --counts[i];
      if (r > best) {
        best = r;
        best_next = i;
      }
    }
    if (!budget_hit_) memo_[key] = {best, best_next};
    return best;
  }

  std::vector<int> per_element_sequence() {
    std::vector<int> counts(grid_.n_pi, 0);
    longest(counts, 0);
    std::vector<int> seq;
    while (true) {
      auto it = memo_.find(counts_key(counts));
      if (it == memo_.end() || it->second.second < 0) break;
      seq.push_back(it->second.second);
      ++counts[it->second.second];
    }
    return seq;
  }

  std::vector<int> shared_sequence(double& shared_eps) {
    std::vector<int> counts(grid_.n_pi, 0);
    std::vector<int> seq;
    best_shared_.clear();
    best_eps_ = eps_;
    shared_dfs(counts, seq, IntervalSet{{eps_, kInf}});
    shared_eps = best_eps_;
    return best_shared_;
  }

  [[nodiscard]] bool truncated() const { return truncated_ || budget_hit_; }
  [[nodiscard]] std::uint64_t nodes() const { return nodes_; }

 private:
  bool out_of_budget() {
    if (++nodes_ > budget_) budget_hit_ = true;
    return budget_hit_;
  }

  void shared_dfs(std::vector<int>& counts, std::vector<int>& seq, const IntervalSet& feasible) {
    const int depth = static_cast<int>(seq.size());
    if (depth > static_cast<int>(best_shared_.size())) {
      best_shared_ = seq;
      best_eps_ = feasible.front().first;
    }
    if (out_of_budget()) return;
    // Shared-rule sequences are also per-element sequences, so this bounds them.
    if (depth + longest(counts, depth) <= static_cast<int>(best_shared_.size())) return;
    std::vector<double> energy;
    grid_.energies(counts, energy);
    for (int i = 0; i < grid_.n_pi; ++i) {
      IntervalSet next = intersect(feasible, element_set(grid_, i, energy, eps_));
      if (next.empty()) continue;
      if (depth >= cap_) {
        truncated_ = true;
        return;
      }
      ++counts[i];
      seq.push_back(i);
      shared_dfs(counts, seq, next);
      seq.pop_back();
      --counts[i];
    }
  }

  const ValueGrid& grid_;
  double eps_;
  int cap_;
  std::uint64_t budget_;
  std::uint64_t nodes_ = 0;
  bool truncated_ = false;
  bool budget_hit_ = false;
  std::unordered_map<std::string, std::pair<int, int>> memo_;
  std::vector<int> best_shared_;
  double best_eps_ = 0.0;
};

void check_eps(double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
}

/// One greedy pass. With `rng` the scan order is reshuffled before every step.
std::vector<int> greedy_pass(const ValueGrid& grid, double eps, EpsRule rule, Rng* rng,
                             double& shared_eps, bool& truncated) {
  std::vector<int> counts(grid.n_pi, 0);
  std::vector<int> order(grid.n_pi);
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> seq;
  std::vector<double> energy;
  IntervalSet feasible{{eps, kInf}};
  while (true) {
    if (static_cast<int>(seq.size()) >= kGreedyMaxLength) {
      truncated = true;
      break;
    }
    if (rng != nullptr) {
      for (int i = grid.n_pi - 1; i > 0; --i) std::swap(order[i], order[rng->uniform_int(i + 1)]);
    }
    grid.energies(counts, energy);
    int chosen = -1;
    for (int i : order) {
      if (rule == EpsRule::kPerElement) {
        if (grid.witness(i, energy, eps) >= 0) {
          chosen = i;
          break;
        }
      } else {
        IntervalSet next = intersect(feasible, element_set(grid, i, energy, eps));
        if (!next.empty()) {
          feasible = std::move(next);
          chosen = i;
          break;
        }
      }
    }
    if (chosen < 0) break;
    seq.push_back(chosen);
    ++counts[chosen];
  }
  shared_eps = feasible.front().first;
  return seq;
}

}  // namespace

std::vector<PointDistribution> dirac_family(int n_states, int n_actions) {
  std::vector<PointDistribution> out;
  out.reserve(static_cast<std::size_t>(n_states) * n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) out.push_back({s, a});
  return out;
}

std::string to_string(EpsRule rule) {
  return rule == EpsRule::kPerElement ? "per_element" : "shared";
}

std::string to_string(DeMethod method) { return method == DeMethod::kExact ? "exact" : "greedy"; }

EpsRule eps_rule_from_string(const std::string& name) {
  if (name == "per_element") return EpsRule::kPerElement;
  if (name == "shared") return EpsRule::kShared;
  throw std::invalid_argument("unknown eps rule: " + name);
}

DeMethod de_method_from_string(const std::string& name) {
  if (name == "exact") return DeMethod::kExact;
  if (name == "greedy") return DeMethod::kGreedy;
  throw std::invalid_argument("unknown method: " + name);
}

std::optional<IndependenceWitness> is_eps_independent(const PointDistribution& nu,
                                                      std::span<const PointDistribution> prefix,
                                                      std::span<const ResidualFunction> G,
                                                      double eps) {
  if (G.empty()) throw std::invalid_argument("empty function class");
  check_eps(eps);
  for (std::size_t g = 0; g < G.size(); ++g) {
    double energy = 0.0;
    for (const auto& mu : prefix) {
      const double x = G[g].at(mu);
      energy += x * x;
    }
    const double eps_prime = std::max(eps, std::sqrt(energy));
    const double value = std::abs(G[g].at(nu));
    if (value > eps_prime) return IndependenceWitness{static_cast<int>(g), eps_prime, energy, value};
  }
  return std::nullopt;
}

DimensionResult de_dimension_exact(std::span<const ResidualFunction> G,
                                   std::span<const PointDistribution> Pi, double eps,
                                   const EluderOptions& options) {
  check_eps(eps);
  DimensionResult result;
  result.method = DeMethod::kExact;
  result.rule = options.rule;
  if (G.empty() || Pi.empty()) return result;
  if (Pi.size() > 255) throw std::invalid_argument("exact search supports at most 255 points");
  const ValueGrid grid(G, Pi);
  ExactSearch search(grid, eps, options);
  double shared_eps = eps;
  std::vector<int> seq = options.rule == EpsRule::kPerElement ? search.per_element_sequence()
                                                              : search.shared_sequence(shared_eps);
  result.value = static_cast<int>(seq.size());
  result.witness_sequence = build_witnesses(grid, Pi, seq, eps, options.rule, shared_eps);
  result.truncated = search.truncated();
  result.nodes = search.nodes();
  return result;
}

DimensionResult de_dimension_greedy(std::span<const ResidualFunction> G,
                                    std::span<const PointDistribution> Pi, double eps,
                                    const EluderOptions& options) {
  check_eps(eps);
  DimensionResult result;
  result.method = DeMethod::kGreedy;
  result.rule = options.rule;
  if (G.empty() || Pi.empty()) return result;
  const ValueGrid grid(G, Pi);
  bool truncated = false;
  double eps_a = eps;
  double eps_b = eps;
  const auto first = greedy_pass(grid, eps, options.rule, nullptr, eps_a, truncated);
  Rng rng(derive_seed(options.seed, 0x67726565ULL));
  const auto shuffled = greedy_pass(grid, eps, options.rule, &rng, eps_b, truncated);
  const bool take_first = first.size() >= shuffled.size();
  const auto& seq = take_first ? first : shuffled;
  result.value = static_cast<int>(seq.size());
  result.witness_sequence =
      build_witnesses(grid, Pi, seq, eps, options.rule, take_first ? eps_a : eps_b);
  result.truncated = truncated;
  result.nodes = first.size() + shuffled.size();
  return result;
}

DimensionResult de_dimension(std::span<const ResidualFunction> G,
                             std::span<const PointDistribution> Pi, double eps,
                             const EluderOptions& options) {
  return options.method == DeMethod::kExact ? de_dimension_exact(G, Pi, eps, options)
                                            : de_dimension_greedy(G, Pi, eps, options);
}

bool replay_witnesses(const DimensionResult& result, std::span<const ResidualFunction> G,
                      double eps) {
  if (static_cast<int>(result.witness_sequence.size()) != result.value) return false;
  std::vector<PointDistribution> prefix;
  const double shared =
      result.witness_sequence.empty() ? eps : result.witness_sequence.front().witness.eps_prime;
  for (const auto& el : result.witness_sequence) {
    const auto& w = el.witness;
    if (w.g < 0 || w.g >= static_cast<int>(G.size())) return false;
    double energy = 0.0;
    for (const auto& mu : prefix) energy += G[w.g].at(mu) * G[w.g].at(mu);
    const double value = std::abs(G[w.g].at(el.nu));
    if (result.rule == EpsRule::kPerElement) {
      if (!is_eps_independent(el.nu, prefix, G, eps)) return false;
      if (!(value > std::max(eps, std::sqrt(energy)))) return false;
    } else {
      if (w.eps_prime != shared || shared < eps) return false;
      if (!(std::sqrt(energy) <= shared + 1e-12 && value > shared)) return false;
    }
    prefix.push_back(el.nu);
  }
  return true;
}

namespace {

void append_unique(std::vector<ResidualFunction>& out,
                   std::unordered_map<std::uint64_t, std::vector<std::size_t>>& buckets,
                   ResidualFunction r) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double x : r.values.values()) {
    h = (h ^ static_cast<std::uint64_t>(std::llround(x * 1e9))) * 0x100000001b3ULL;
  }
  auto& bucket = buckets[h];
  for (std::size_t i : bucket) {
    if (max_abs_diff(out[i].values, r.values) <= 1e-12) return;
  }
  bucket.push_back(out.size());
  out.push_back(std::move(r));
}

std::vector<ResidualFunction> residuals_for(const FunctionClass& fc, const NonstationaryMdp& mdp,
                                            int h, int k_begin, int k_end) {
  check_class_shape(fc);
  if (!(fc.dims == mdp.dims())) throw std::invalid_argument("class and MDP shapes differ");
  if (h < 0 || h >= mdp.horizon()) throw std::out_of_range("step index out of range");
  const auto reps = mdp.distinct_episode_map();
  std::vector<ResidualFunction> out;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
  const double bound = mdp.horizon() + 1e-9;
  for (std::size_t i = 0; i < fc.members.size(); ++i) {
    for (int k = k_begin; k < k_end; ++k) {
      if (reps[k] != k && reps[k] >= k_begin) continue;
      StepTable r = bellman_residual(mdp.episode(k), h, fc.members[i]);
      for (double x : r.values()) {
        if (std::abs(x) > bound) throw std::logic_error("residual exceeds H in magnitude");
      }
      append_unique(out, buckets, {std::move(r), static_cast<int>(i), k, h});
    }
  }
  return out;
}

StepwiseDimension stepwise(const FunctionClass& fc, const NonstationaryMdp& mdp, double eps,
                           const EluderOptions& options, int k_begin, int k_end) {
  StepwiseDimension out;
  const auto pi = dirac_family(mdp.n_states(), mdp.n_actions());
  for (int h = 0; h < mdp.horizon(); ++h) {
    const auto G = residuals_for(fc, mdp, h, k_begin, k_end);
    auto r = de_dimension(G, pi, eps, options);
    out.value = std::max(out.value, r.value);
    out.truncated = out.truncated || r.truncated;
    out.residual_counts.push_back(static_cast<int>(G.size()));
    out.per_step.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<ResidualFunction> residual_class(const FunctionClass& fc, const NonstationaryMdp& mdp,
                                             int h) {
  return residuals_for(fc, mdp, h, 0, mdp.n_episodes());
}

std::vector<ResidualFunction> residual_class(const FunctionClass& fc, const NonstationaryMdp& mdp,
                                             int k, int h) {
  if (k < 0 || k >= mdp.n_episodes()) throw std::out_of_range("episode index out of range");
  return residuals_for(fc, mdp, h, k, k + 1);
}

StepwiseDimension dbe_dimension(const FunctionClass& fc, const NonstationaryMdp& mdp, double eps,
                                const EluderOptions& options) {
  return stepwise(fc, mdp, eps, options, 0, mdp.n_episodes());
}

StepwiseDimension be_dimension(const FunctionClass& fc, const NonstationaryMdp& mdp, int k,
                               double eps, const EluderOptions& options) {
  if (k < 0 || k >= mdp.n_episodes()) throw std::out_of_range("episode index out of range");
  return stepwise(fc, mdp, eps, options, k, k + 1);
}

GapResult universal_gap(std::span<const ResidualFunction> G, std::span<const PointDistribution> Pi,
                        double eps, std::uint64_t node_budget) {
  check_eps(eps);
  GapResult best;
  best.value = kInf;
  if (G.empty() || Pi.empty()) return best;
  const ValueGrid grid(G, Pi);
  const int n = grid.n_pi;
  std::uint64_t nodes = 0;

  for (int g = 0; g < grid.n_g; ++g) {
    // Points where g is nonzero, largest square first; the last one is filled
    // greedily instead of enumerated.
    std::vector<int> support;
    for (int i = 0; i < n; ++i) {
      if (grid.sq[grid.idx(g, i)] > 0.0) support.push_back(i);
    }
    std::sort(support.begin(), support.end(), [&](int a, int b) {
      return grid.sq[grid.idx(g, a)] > grid.sq[grid.idx(g, b)];
    });

    for (int nu = 0; nu < n; ++nu) {
      const double v = grid.abs_v[grid.idx(g, nu)];
      if (v <= eps) continue;
      const double limit = v * v;  // prefix energy must stay strictly below
      std::vector<int> counts(n, 0);

      auto leaf = [&](double partial) {
        double energy = partial;
        int fill = 0;
        if (!support.empty()) {
          const double a = grid.sq[grid.idx(g, support.back())];
          fill = static_cast<int>(std::floor((limit - partial) / a));
          while (fill > 0 && partial + fill * a >= limit) --fill;
          energy = partial + fill * a;
        }
        const double eps_prime = std::max(eps, std::sqrt(energy));
        if (v > eps_prime && v - eps_prime < best.value) {
          best.value = v - eps_prime;
          best.g = g;
          best.nu = nu;
          best.eps_prime = eps_prime;
          best.prefix_counts = counts;
          if (!support.empty()) best.prefix_counts[support.back()] += fill;
        }
      };
      auto rec = [&](auto& self, std::size_t j, double partial) -> void {
        if (best.truncated) return;
        if (++nodes > node_budget) {
          best.truncated = true;
          return;
        }
        if (support.empty() || j + 1 >= support.size()) {
          leaf(partial);
          return;
        }
        const int i = support[j];
        const double a = grid.sq[grid.idx(g, i)];
        for (int c = 0; partial + c * a < limit && !best.truncated; ++c) {
          counts[i] = c;
          self(self, j + 1, partial + c * a);
        }
        counts[i] = 0;
      };
      rec(rec, 0, 0.0);
      if (best.truncated) return best;
    }
  }
  return best;
}

double LinearResidualInstance::weight_bound() const {
  return 2.0 * horizon * std::sqrt(static_cast<double>(d));
}

namespace {

std::vector<double> random_direction(int d, Rng& rng) {
  std::vector<double> v(d);
  double norm = 0.0;
  while (norm == 0.0) {
    norm = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
  }
  for (double& x : v) x /= norm;
  return v;
}

std::vector<double> random_in_ball(int d, double radius, Rng& rng) {
  auto v = random_direction(d, rng);
  const double r = radius * std::pow(rng.uniform(), 1.0 / d);
  for (double& x : v) x *= r;
  return v;
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

LinearResidualInstance linear_class_generator(int d, int horizon, int n_episodes, int n_members,
                                              double drift_scale, Rng& rng) {
  if (d < 1 || horizon < 1 || n_episodes < 1 || n_members < 1) {
    throw std::invalid_argument("linear class sizes must be positive");
  }
  if (drift_scale < 0.0) throw std::invalid_argument("drift_scale must be >= 0");
  LinearResidualInstance inst;
  inst.d = d;
  inst.horizon = horizon;
  inst.n_episodes = n_episodes;
  // Basis vectors guarantee the span; the extra points sit inside the unit ball.
  for (int j = 0; j < d; ++j) {
    std::vector<double> e(d, 0.0);
    e[j] = 1.0;
    inst.features.push_back(std::move(e));
  }
  for (int j = 0; j < 2 * d; ++j) inst.features.push_back(random_in_ball(d, 1.0, rng));
  const int n_points = static_cast<int>(inst.features.size());
  for (int p = 0; p < n_points; ++p) inst.pi.push_back({p, 0});

  const double half = horizon * std::sqrt(static_cast<double>(d));
  const double bound = inst.weight_bound();
  inst.residuals.resize(horizon);
  for (int h = 0; h < horizon; ++h) {
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
    for (int i = 0; i < n_members; ++i) {
      const auto w = random_in_ball(d, half, rng);
      const auto base = random_in_ball(d, half, rng);
      const auto dir = random_direction(d, rng);
      for (int k = 0; k < n_episodes; ++k) {
        std::vector<double> wt = base;
        for (int j = 0; j < d; ++j) wt[j] += drift_scale * k * dir[j];
        const double nrm = norm2(wt);
        if (nrm > bound) {
          for (double& x : wt) x *= bound / nrm;
        }
        StepTable values(n_points, 1);
        for (int p = 0; p < n_points; ++p) {
          double x = 0.0;
          for (int j = 0; j < d; ++j) x += inst.features[p][j] * (w[j] - wt[j]);
          values(p, 0) = x;
        }
        append_unique(inst.residuals[h], buckets, {std::move(values), i, k, h});
      }
    }
  }
  return inst;
}

}  // namespace swopea
