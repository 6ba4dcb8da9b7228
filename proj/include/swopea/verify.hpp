#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace swopea {

/// Outcome of one numeric property sweep. For inequalities lhs <= rhs the
/// slack is lhs - rhs (<= 0 when it holds); for equalities it is |lhs - rhs|.
struct VerifyReport {
  std::string suite;
  int trials = 0;
  int violations = 0;
  int skipped = 0;
  double worst_slack = -std::numeric_limits<double>::infinity();
  double tolerance = 0.0;
  bool passed = true;
  std::map<std::string, double> diagnostics;
};

/// Suite names accepted by run_verify.
std::vector<std::string> verify_suites();
int default_trials(const std::string& suite);

/// Runs one suite; n_trials <= 0 picks the default count. Throws
/// std::invalid_argument on an unknown suite.
VerifyReport run_verify(const std::string& suite, int n_trials, std::uint64_t seed);

/// Separate exhaustive reference for the per-element DE dimension over a
/// value grid vals[g][i]: grows every valid sequence level by level up to
/// `cap`. Returns -1 if a sequence longer than cap exists.
int brute_force_de_dimension(const std::vector<std::vector<double>>& vals, double eps, int cap);

}  // namespace swopea
