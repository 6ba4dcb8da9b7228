#pragma once

#include <string>
#include <vector>

#include "swopea/mdp.hpp"
#include "swopea/rng.hpp"
#include "swopea/tables.hpp"

namespace swopea {

/// Candidate action-value function (f_1, ..., f_H); f_{H+1} = 0 implicitly.
/// Step h (0-based) should take values in [0, H - h].
struct QFunction {
  std::vector<StepTable> steps;

  [[nodiscard]] int horizon() const { return static_cast<int>(steps.size()); }
  [[nodiscard]] const StepTable& step(int h) const { return steps.at(h); }
  /// max_a f_{h+1}(s', a) for every s'; all zeros past the last step.
  [[nodiscard]] std::vector<double> next_state_values(int h) const;

  bool operator==(const QFunction&) const = default;
};

/// Largest entrywise distance over all steps.
double max_abs_diff(const QFunction& a, const QFunction& b);

/// Greedy policy pi_f, ties to the lowest action index.
Policy greedy_policy(const QFunction& f);

QFunction from_value_tables(const ValueTables& values);

/// Finite class F of full tuples plus the auxiliary class G.
struct FunctionClass {
  Dims dims;
  std::vector<QFunction> members;
  std::vector<QFunction> aux_members;
  std::string provenance;
  /// Set when building the closure had to clip a backup into range.
  bool clipped_backups = false;

  [[nodiscard]] std::size_t size() const { return members.size(); }
  /// Distinct step-h components of the auxiliary class (G_h).
  [[nodiscard]] std::vector<StepTable> aux_step(int h) const;
};

/// Throws unless the class is nonempty and every member has shape `dims`.
void check_class_shape(const FunctionClass& fc);

/// (T_h^k f_{h+1})(s,a) = r_h^k(s,a) + sum_{s'} P_h^k(s'|s,a) next_values[s'].
/// `next_values` holds max_a f_{h+1}(s', a); it must be all zeros at the last
/// step. Throws std::invalid_argument on a shape mismatch.
StepTable bellman_apply(const EpisodeModel& model, int h, std::span<const double> next_values);
StepTable bellman_apply(const NonstationaryMdp& mdp, int k, int h, const StepTable& f_next);
/// Last-step form, f_{H+1} = 0.
StepTable bellman_apply(const NonstationaryMdp& mdp, int k, int h);

/// f_h - T_h^k f_{h+1} as a table.
StepTable bellman_residual(const EpisodeModel& model, int h, const QFunction& f);

struct RealizabilityReport {
  bool passed = true;
  double worst_gap = 0.0;
  std::vector<double> gap_per_episode;  // min over members of max-entry distance to Q*_k
  std::vector<int> matching_member;     // best member per episode
};

RealizabilityReport check_realizability(const FunctionClass& fc, const NonstationaryMdp& mdp,
                                        double tol);

struct CompletenessReport {
  bool passed = true;
  double worst_violation = 0.0;
  int worst_episode = -1;
  int worst_step = -1;
  int worst_member = -1;
};

/// For every (k, h) and member f, distance from T_h^k f_{h+1} to the nearest
/// step-h component of G.
CompletenessReport check_completeness(const FunctionClass& fc, const NonstationaryMdp& mdp,
                                      double tol);

/// Index of the member matching `target` within `tol`, or -1.
int find_member(const std::vector<QFunction>& members, const QFunction& target, double tol = 1e-12);

/// Appends `f` unless a member within 1e-12 already exists; returns its index.
int insert_unique(std::vector<QFunction>& members, QFunction f);

struct ClassBuildOptions {
  int n_distractors = 0;
  double perturb_scale = 0.0;
  bool closure = true;
};

/// Members: Q*_{(*,k)} of every episode (deduplicated) followed by clipped
/// random perturbations of them. With closure, G = F plus the tuples
/// (T_1^k f_2, ..., T_H^k 0) for every member f and episode k.
FunctionClass build_realizable_class(const NonstationaryMdp& mdp, const ClassBuildOptions& options,
                                     Rng& rng);

}  // namespace swopea
