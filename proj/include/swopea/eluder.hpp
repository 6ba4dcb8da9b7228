#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swopea/function_class.hpp"
#include "swopea/mdp.hpp"
#include "swopea/rng.hpp"
#include "swopea/tables.hpp"

namespace swopea {

/// Dirac mass on one (state, action) pair.
struct PointDistribution {
  int state = 0;
  int action = 0;
  bool operator==(const PointDistribution&) const = default;
};

/// Every (s, a) pair of an |S| x |A| grid, state-major.
std::vector<PointDistribution> dirac_family(int n_states, int n_actions);

/// One Bellman residual table with its origin; -1 marks an unknown field.
struct ResidualFunction {
  StepTable values;
  int member = -1;
  int episode = -1;
  int step = -1;

  [[nodiscard]] double at(const PointDistribution& p) const { return values(p.state, p.action); }
};

struct IndependenceWitness {
  int g = -1;
  double eps_prime = 0.0;
  double prefix_energy = 0.0;  // sum over the prefix of (E_mu g)^2
  double nu_value = 0.0;       // |E_nu g|
};

/// How eps' is quantified along a sequence. kPerElement lets every element
/// pick its own eps' = max(eps, sqrt(energy)); kShared needs one eps' >= eps
/// that works for the whole sequence.
enum class EpsRule { kPerElement, kShared };
enum class DeMethod { kExact, kGreedy };

std::string to_string(EpsRule rule);
std::string to_string(DeMethod method);
EpsRule eps_rule_from_string(const std::string& name);
DeMethod de_method_from_string(const std::string& name);

/// Lowest-index g with |g(nu)| > max(eps, sqrt(prefix energy of g)), if any.
/// Throws std::invalid_argument on empty G or eps <= 0.
std::optional<IndependenceWitness> is_eps_independent(const PointDistribution& nu,
                                                      std::span<const PointDistribution> prefix,
                                                      std::span<const ResidualFunction> G,
                                                      double eps);

struct WitnessedElement {
  PointDistribution nu;
  IndependenceWitness witness;
};

struct DimensionResult {
  int value = 0;
  DeMethod method = DeMethod::kExact;
  EpsRule rule = EpsRule::kPerElement;
  std::vector<WitnessedElement> witness_sequence;
  bool truncated = false;
  std::uint64_t nodes = 0;
};

struct EluderOptions {
  DeMethod method = DeMethod::kExact;
  EpsRule rule = EpsRule::kPerElement;
  int cap = 12;                          // longest sequence the exact search explores
  std::uint64_t node_budget = 10'000'000;
  std::uint64_t seed = 0;                // greedy restart pass
};

/// Longest independent sequence from Pi (repeats allowed). Sets `truncated`
/// when a length-cap sequence can still be extended or the node budget ran out.
DimensionResult de_dimension_exact(std::span<const ResidualFunction> G,
                                   std::span<const PointDistribution> Pi, double eps,
                                   const EluderOptions& options = {});

/// First-found greedy pass in Pi order plus one shuffled pass; keeps the longer.
DimensionResult de_dimension_greedy(std::span<const ResidualFunction> G,
                                    std::span<const PointDistribution> Pi, double eps,
                                    const EluderOptions& options = {});

DimensionResult de_dimension(std::span<const ResidualFunction> G,
                             std::span<const PointDistribution> Pi, double eps,
                             const EluderOptions& options);

/// True when every element of `result` is independent of its predecessors
/// under result.rule (and, for kShared, one common eps').
bool replay_witnesses(const DimensionResult& result, std::span<const ResidualFunction> G,
                      double eps);

/// {f_h - T_h^k f_{h+1}} over members and episodes, deduplicated at 1e-12.
/// Throws std::logic_error if a residual exceeds H in magnitude.
std::vector<ResidualFunction> residual_class(const FunctionClass& fc, const NonstationaryMdp& mdp,
                                             int h);
/// Same, restricted to episode k.
std::vector<ResidualFunction> residual_class(const FunctionClass& fc, const NonstationaryMdp& mdp,
                                             int k, int h);

struct StepwiseDimension {
  int value = 0;  // max over steps
  bool truncated = false;
  std::vector<DimensionResult> per_step;
  std::vector<int> residual_counts;
};

StepwiseDimension dbe_dimension(const FunctionClass& fc, const NonstationaryMdp& mdp, double eps,
                                const EluderOptions& options = {});
StepwiseDimension be_dimension(const FunctionClass& fc, const NonstationaryMdp& mdp, int k,
                               double eps, const EluderOptions& options = {});

struct GapResult {
  double value = 0.0;  // +inf without any witness
  bool truncated = false;  // node budget ran out; value is then only an upper bound
  int g = -1;
  int nu = -1;
  double eps_prime = 0.0;
  std::vector<int> prefix_counts;  // multiplicity of each Pi element in the minimizing prefix
};

/// Smallest |g(nu)| - max(eps, sqrt(energy)) over g, nu and every prefix
/// multiset of Pi (any size) whose g-energy stays below g(nu)^2. For each
/// (g, nu) this is the largest multiset energy strictly under g(nu)^2.
GapResult universal_gap(std::span<const ResidualFunction> G, std::span<const PointDistribution> Pi,
                        double eps, std::uint64_t node_budget = 10'000'000);

/// Residual stand-in for a drifting linear MDP: Pi is a grid of feature
/// points and each residual is phi^T (w - w~) with both weights of norm at
/// most 2 H sqrt(d).
struct LinearResidualInstance {
  int d = 1;
  int horizon = 1;
  int n_episodes = 1;
  std::vector<std::vector<double>> features;             // one row per point of Pi
  std::vector<PointDistribution> pi;                     // (point index, 0)
  std::vector<std::vector<ResidualFunction>> residuals;  // [h], deduplicated
  [[nodiscard]] double weight_bound() const;             // 2 H sqrt(d)
};

LinearResidualInstance linear_class_generator(int d, int horizon, int n_episodes, int n_members,
                                              double drift_scale, Rng& rng);

}  // namespace swopea
