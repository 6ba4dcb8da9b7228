#include "doctest.h"

#include <stdexcept>

#include "swopea/verify.hpp"

using namespace swopea;

TEST_CASE("brute force dimension on hand instances") {
  CHECK(brute_force_de_dimension({{0.0, 0.0}}, 0.1, 6) == 0);
  CHECK(brute_force_de_dimension({{1.0}}, 0.5, 6) == 1);
  // The small point first, then the large one; nothing after.
  CHECK(brute_force_de_dimension({{1.0, 0.3}}, 0.1, 6) == 2);
  // Two orthogonal directions.
  CHECK(brute_force_de_dimension({{1.0, 0.0}, {0.0, 1.0}}, 0.5, 6) == 2);
  // Value below eps everywhere.
  CHECK(brute_force_de_dimension({{0.4, -0.4}}, 0.5, 6) == 0);
}

TEST_CASE("brute force reports an exceeded cap") {
  // Shrinking values let each point follow all earlier ones.
  std::vector<std::vector<double>> vals;
  for (int i = 0; i < 5; ++i) {
    std::vector<double> g(5, 0.0);
    g[i] = 1.0;
    vals.push_back(g);
  }
  CHECK(brute_force_de_dimension(vals, 0.5, 5) == 5);
  CHECK(brute_force_de_dimension(vals, 0.5, 3) == -1);
}

TEST_CASE("every suite passes with few trials") {
  for (const auto& suite : verify_suites()) {
    CAPTURE(suite);
    const auto r = run_verify(suite, 5, 17);
    CHECK(r.trials == 5);
    CHECK(r.violations == 0);
    CHECK(r.passed);
    CHECK(default_trials(suite) > 0);
  }
}

TEST_CASE("verify runs are reproducible") {
  const auto a = run_verify("lemmaC1", 8, 4);
  const auto b = run_verify("lemmaC1", 8, 4);
  CHECK(a.worst_slack == b.worst_slack);
  CHECK(a.diagnostics == b.diagnostics);
}

TEST_CASE("unknown suite") { CHECK_THROWS_AS(run_verify("nope", 1, 0), std::invalid_argument); }
