#include "doctest.h"

#include <cmath>

#include "eluder_oracle.hpp"
#include "fixtures.hpp"
#include "swopea/eluder.hpp"

using namespace swopea;

namespace {

// Residual over a 1 x n grid given its values at the n points.
ResidualFunction over_points(std::vector<double> v) {
  StepTable t(static_cast<int>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) t(static_cast<int>(i), 0) = v[i];
  return {t};
}

std::vector<PointDistribution> points(int n) { return dirac_family(n, 1); }

oracle::Grid grid_of(const std::vector<ResidualFunction>& G, int n) {
  oracle::Grid g;
  for (const auto& r : G) {
    std::vector<double> row;
    for (int i = 0; i < n; ++i) row.push_back(r.values(i, 0));
    g.push_back(row);
  }
  return g;
}

std::vector<ResidualFunction> random_class(Rng& rng, int n_g, int n_pi) {
  std::vector<ResidualFunction> G;
  for (int g = 0; g < n_g; ++g) {
    std::vector<double> v(n_pi);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    G.push_back(over_points(v));
  }
  return G;
}

}  // namespace

TEST_CASE("independence hand cases") {
  std::vector<ResidualFunction> one{over_points({1.0, 1.0})};
  auto pi = points(2);
  std::vector<PointDistribution> none;
  auto w = is_eps_independent(pi[0], none, one, 0.5);
  REQUIRE(w);
  CHECK(w->eps_prime == 0.5);
  CHECK(w->nu_value == 1.0);
  CHECK(w->prefix_energy == 0.0);

  std::vector<PointDistribution> prefix{pi[1]};
  CHECK_FALSE(is_eps_independent(pi[0], prefix, one, 0.5));

  std::vector<ResidualFunction> zero{over_points({0.0, 0.0})};
  CHECK_FALSE(is_eps_independent(pi[0], none, zero, 0.5));
  std::vector<ResidualFunction> empty;
  CHECK_THROWS_AS(is_eps_independent(pi[0], none, empty, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(is_eps_independent(pi[0], none, one, 0.0), std::invalid_argument);
}

TEST_CASE("dimension hand cases") {
  auto pi2 = points(2);
  std::vector<ResidualFunction> zero{over_points({0.0, 0.0})};
  std::vector<ResidualFunction> one{over_points({1.0, 1.0})};
  CHECK(de_dimension_exact(zero, pi2, 0.5).value == 0);
  CHECK(de_dimension_greedy(zero, pi2, 0.5).value == 0);
  auto r = de_dimension_exact(one, pi2, 0.5);
  CHECK(r.value == 1);
  CHECK_FALSE(r.truncated);
  CHECK(replay_witnesses(r, one, 0.5));

  auto pi1 = points(1);
  std::vector<ResidualFunction> single{over_points({1.0})};
  CHECK(de_dimension_exact(single, pi1, 0.5).value == 1);
}

TEST_CASE("two orthogonal directions give dimension 2") {
  std::vector<ResidualFunction> G{over_points({1.0, 0.0}), over_points({0.0, 1.0})};
  auto r = de_dimension_exact(G, points(2), 0.5);
  CHECK(r.value == 2);
  CHECK(replay_witnesses(r, G, 0.5));
}

TEST_CASE("repeats are allowed while energy stays small") {
  // After 0.6 a repeat needs 0.6 > sqrt(0.36) and fails; 1.0 still passes.
  std::vector<ResidualFunction> G{over_points({0.6, 1.0})};
  auto r = de_dimension_exact(G, points(2), 0.5);
  CHECK(r.value == 2);
  CHECK(r.witness_sequence[0].nu.state == 0);
  CHECK(r.witness_sequence[1].nu.state == 1);
}

TEST_CASE("exact search matches the brute-force enumerator") {
  Rng rng(2024);
  int compared = 0;
  for (int trial = 0; trial < 80; ++trial) {
    const int n_pi = 1 + rng.uniform_int(4);
    const int n_g = 1 + rng.uniform_int(6);
    const double eps = 0.3 + 0.4 * rng.uniform();
    auto G = random_class(rng, n_g, n_pi);
    auto pi = points(n_pi);
    EluderOptions opt;
    opt.cap = 8;
    auto exact = de_dimension_exact(G, pi, eps, opt);
    auto ref = oracle::longest(grid_of(G, n_pi), n_pi, eps, 8, false);
    CHECK(exact.value == ref.value);
    CHECK(exact.truncated == ref.hit_cap);
    CHECK(replay_witnesses(exact, G, eps));
    auto greedy = de_dimension_greedy(G, pi, eps, opt);
    CHECK(greedy.value <= exact.value);
    CHECK(replay_witnesses(greedy, G, eps));
    ++compared;
  }
  CHECK(compared == 80);
}

TEST_CASE("shared eps' search matches the brute-force enumerator") {
  Rng rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const int n_pi = 1 + rng.uniform_int(3);
    const int n_g = 1 + rng.uniform_int(4);
    const double eps = 0.3 + 0.4 * rng.uniform();
    auto G = random_class(rng, n_g, n_pi);
    auto pi = points(n_pi);
    EluderOptions opt;
    opt.cap = 7;
    opt.rule = EpsRule::kShared;
    auto exact = de_dimension_exact(G, pi, eps, opt);
    auto ref = oracle::longest(grid_of(G, n_pi), n_pi, eps, 7, true);
    CHECK(exact.value == ref.value);
    CHECK(replay_witnesses(exact, G, eps));
    auto greedy = de_dimension_greedy(G, pi, eps, opt);
    CHECK(greedy.value <= exact.value);
    CHECK(replay_witnesses(greedy, G, eps));

    opt.rule = EpsRule::kPerElement;
    CHECK(exact.value <= de_dimension_exact(G, pi, eps, opt).value);
  }
}

TEST_CASE("exact dimension is monotone in eps and in the class") {
  Rng rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    auto G = random_class(rng, 4, 3);
    auto pi = points(3);
    EluderOptions opt;
    opt.cap = 10;
    const int coarse = de_dimension_exact(G, pi, 0.5, opt).value;
    const int fine = de_dimension_exact(G, pi, 0.3, opt).value;
    CHECK(fine >= coarse);
    std::vector<ResidualFunction> sub(G.begin(), G.begin() + 2);
    CHECK(de_dimension_exact(sub, pi, 0.5, opt).value <= coarse);
  }
}

TEST_CASE("greedy is monotone in eps on the test corpus") {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    auto G = random_class(rng, 3, 3);
    auto pi = points(3);
    CHECK(de_dimension_greedy(G, pi, 0.1).value >= de_dimension_greedy(G, pi, 0.5).value);
  }
}

TEST_CASE("truncation is reported") {
  // Values halve geometrically, so long sequences exist at small eps.
  std::vector<ResidualFunction> G{over_points({1.0, 0.7, 0.49, 0.343})};
  EluderOptions opt;
  opt.cap = 2;
  auto r = de_dimension_exact(G, points(4), 0.01, opt);
  CHECK(r.value == 2);
  CHECK(r.truncated);
  opt.cap = 12;
  opt.node_budget = 3;
  CHECK(de_dimension_exact(G, points(4), 0.01, opt).truncated);
}

TEST_CASE("residual classes") {
  auto mdp = fixtures::random_stationary({2, 2, 2}, 3, 3);
  FunctionClass fc;
  fc.dims = mdp.dims();
  fc.members.push_back(from_value_tables(optimal_values(mdp, 0)));
  fc.aux_members = fc.members;
  for (int h = 0; h < 2; ++h) {
    auto R = residual_class(fc, mdp, h);
    REQUIRE(R.size() == 1);
    for (double x : R[0].values.values()) CHECK(std::abs(x) <= 1e-12);
  }
  CHECK(dbe_dimension(fc, mdp, 0.1).value == 0);
  CHECK(be_dimension(fc, mdp, 0, 0.1).value == 0);

  Rng rng(4);
  auto drifting = fixtures::random_sequence({2, 2, 2}, 8, 2);
  auto cls = build_realizable_class(drifting, {1, 0.4, false}, rng);
  for (int h = 0; h < 2; ++h) {
    CHECK(residual_class(cls, drifting, h).size() <= cls.members.size() * 2);
    CHECK(residual_class(cls, drifting, 0, h).size() <= cls.members.size());
  }
}

TEST_CASE("stationary DBE equals BE of the first episode") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto mdp = fixtures::random_stationary({2, 2, 2}, seed, 3);
    Rng rng(seed);
    FunctionClass fc;
    fc.dims = mdp.dims();
    fc.members.push_back(from_value_tables(optimal_values(mdp, 0)));
    for (int i = 0; i < 2; ++i) {
      QFunction f = fc.members[0];
      for (auto& t : f.steps)
        for (double& x : t.values()) x = std::max(0.0, x + rng.uniform(-0.5, 0.5));
      fc.members.push_back(f);
    }
    fc.aux_members = fc.members;
    for (int h = 0; h < 2; ++h) {
      auto a = residual_class(fc, mdp, h);
      auto b = residual_class(fc, mdp, 0, h);
      REQUIRE(a.size() == b.size());
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].values == b[i].values);
    }
    CHECK(dbe_dimension(fc, mdp, 0.2).value == be_dimension(fc, mdp, 0, 0.2).value);
  }
}

TEST_CASE("tiny drifting instance: DBE against the enumerator, BE <= DBE") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto mdp = fixtures::random_sequence({2, 2, 2}, 50 + seed, 2);
    Rng rng(seed);
    auto fc = build_realizable_class(mdp, {1, 0.5, false}, rng);
    REQUIRE(fc.members.size() == 3);
    EluderOptions opt;
    opt.cap = 8;
    const double eps = 0.3;
    auto dbe = dbe_dimension(fc, mdp, eps, opt);
    int ref = 0;
    auto pi = dirac_family(2, 2);
    for (int h = 0; h < 2; ++h) {
      auto R = residual_class(fc, mdp, h);
      oracle::Grid grid;
      for (const auto& r : R) {
        std::vector<double> row;
        for (const auto& p : pi) row.push_back(r.at(p));
        grid.push_back(row);
      }
      ref = std::max(ref, oracle::longest(grid, 4, eps, 8, false).value);
    }
    CHECK(dbe.value == ref);
    for (int k = 0; k < 2; ++k) CHECK(be_dimension(fc, mdp, k, eps, opt).value <= dbe.value);
  }
}

TEST_CASE("universal gap") {
  std::vector<ResidualFunction> one{over_points({1.0})};
  auto g = universal_gap(one, points(1), 0.5);
  CHECK(g.value == doctest::Approx(0.5));
  CHECK_FALSE(g.truncated);

  std::vector<ResidualFunction> zero{over_points({0.0, 0.0})};
  CHECK(std::isinf(universal_gap(zero, points(2), 0.5).value));

  // Shrinking eps can enlarge the gap: with g = 1 the only witnesses have an
  // empty prefix, so the gap is 1 - eps.
  CHECK(universal_gap(one, points(1), 0.1).value == doctest::Approx(0.9));
}

TEST_CASE("universal gap against direct prefix enumeration") {
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    auto G = random_class(rng, 2, 2);
    const double eps = 0.2;
    auto got = universal_gap(G, points(2), eps);
    CHECK_FALSE(got.truncated);
    // Every count pair whose energy stays below the largest square.
    double top = 0.0;
    for (const auto& r : G)
      for (double x : r.values.values()) top = std::max(top, x * x);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : G) {
      const double s0 = r.values(0, 0) * r.values(0, 0);
      const double s1 = r.values(1, 0) * r.values(1, 0);
      for (int a = 0; a * s0 < top && (s0 > 0 || a == 0); ++a)
        for (int b = 0; a * s0 + b * s1 < top && (s1 > 0 || b == 0); ++b) {
          const double ep = std::max(eps, std::sqrt(a * s0 + b * s1));
          for (int nu = 0; nu < 2; ++nu) {
            const double v = std::abs(r.values(nu, 0));
            if (v > ep) best = std::min(best, v - ep);
          }
        }
    }
    CHECK(got.value == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("universal gap fills with the smallest square") {
  // g = (1, 0.3): prefixes of eleven copies of point 1 reach 0.99 < 1.
  std::vector<ResidualFunction> G{over_points({1.0, 0.3})};
  auto g = universal_gap(G, points(2), 0.1);
  CHECK(g.value == doctest::Approx(1.0 - std::sqrt(0.99)));
  CHECK(g.prefix_counts == std::vector<int>{0, 11});
  auto tiny = universal_gap(G, points(2), 0.1, 1);
  CHECK(tiny.truncated);
}

TEST_CASE("linear class generator") {
  Rng rng(1);
  auto inst = linear_class_generator(2, 2, 5, 3, 0.1, rng);
  const double bound = 2.0 * inst.weight_bound();
  for (const auto& step : inst.residuals)
    for (const auto& r : step)
      for (double x : r.values.values()) CHECK(std::abs(x) <= bound + 1e-12);
  for (const auto& f : inst.features) {
    double n = 0.0;
    for (double x : f) n += x * x;
    CHECK(n <= 1.0 + 1e-12);
  }

  Rng a(3);
  auto still = linear_class_generator(2, 2, 5, 3, 0.0, a);
  for (const auto& step : still.residuals) {
    CHECK(step.size() == 3);
    for (const auto& r : step) CHECK(r.episode == 0);
  }

  Rng b(4);
  auto d1 = linear_class_generator(1, 2, 10, 4, 0.05, b);
  const double envelope = 4.0 * (1.0 + std::log(16.0 * 4.0 / 0.25 + 1.0));
  for (const auto& step : d1.residuals) CHECK(de_dimension_greedy(step, d1.pi, 0.5).value <= envelope);
}
