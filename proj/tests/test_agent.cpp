#include "doctest.h"

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "swopea/agent.hpp"

using namespace swopea;

namespace {

// F = {Q*, Q* + 0.8 at (step 0, x1 = 0, flip)} on the two-state chain.
FunctionClass chain_class(const NonstationaryMdp& mdp) {
  FunctionClass fc;
  fc.dims = mdp.dims();
  QFunction q = from_value_tables(optimal_values(mdp, 0));
  QFunction bump = q;
  bump.steps[0](0, 1) += 0.8;
  fc.members = {q, bump};
  fc.aux_members = fc.members;
  return fc;
}

Trajectory one_step(int episode, int s, int a, int s2, double r) {
  return {episode, {{s, a, r, s2}}};
}

}  // namespace

TEST_CASE("sliding-window loss arithmetic") {
  StepTable xi(2, 1);
  std::vector<double> next{0.0, 0.0};
  std::vector<Transition> data{{0, 0, 0, 0, 0.0}};
  CHECK(sw_bellman_loss(xi, next, data) == 0.0);
  xi(0, 0) = 0.5;
  CHECK(sw_bellman_loss(xi, next, data) == doctest::Approx(0.25));
  data.push_back({1, 1, 0, 0, 0.0});
  xi(1, 0) = -0.5;
  CHECK(sw_bellman_loss(xi, next, data) == doctest::Approx(0.5));
  CHECK(sw_bellman_loss(xi, next, {}) == 0.0);

  StepTable rewards(2, 1, 0.5);
  xi(0, 0) = 1.5;
  next[0] = 1.0;
  // rho from the reward table (0.5) instead of the stored 0.
  CHECK(sw_bellman_loss(xi, next, std::span(data).first(1), &rewards) == 0.0);
}

TEST_CASE("dataset windows") {
  SlidingWindowDataset d(1);
  for (int k = 0; k < 5; ++k) d.add(one_step(k, 0, 0, 0, 0.1 * k));
  CHECK(d.window(0, 4, 2).size() == 3);
  CHECK(d.window(0, 4, 2).front().episode == 2);
  CHECK(d.window(0, 2, std::nullopt).size() == 3);
  CHECK(d.window(0, 1, 10).size() == 2);
  CHECK_THROWS(d.add(one_step(3, 0, 0, 0, 0.0)));
  d.clear();
  CHECK(d.step(0).empty());
}

TEST_CASE("optimistic selection") {
  FunctionClass fc;
  fc.dims = {1, 2, 1};
  QFunction f{{StepTable(1, 2)}};
  f.steps[0](0, 1) = 0.7;
  QFunction g{{StepTable(1, 2)}};
  g.steps[0](0, 0) = 0.9;
  fc.members = {f, g, g};
  std::vector<int> both{0, 1};
  auto s = optimistic_select(both, fc, 0);
  CHECK(s.member == 1);
  CHECK(s.policy(0, 0) == 0);
  std::vector<int> one{0};
  CHECK(optimistic_select(one, fc, 0).member == 0);
  std::vector<int> tie{1, 2};
  CHECK(optimistic_select(tie, fc, 0).member == 1);
  std::vector<int> none;
  CHECK_THROWS_AS(optimistic_select(none, fc, 0, 7), EmptyConfidenceSet);
}

TEST_CASE("closed-form confidence set on the chain") {
  auto mdp = NonstationaryMdp::stationary(fixtures::two_state_chain(), 0, 3);
  auto fc = chain_class(mdp);
  AgentConfig cfg;
  cfg.beta = 0.1;
  SlidingWindowDataset data(2);
  // Optimal trajectory: flip to state 1, then stay.
  data.add({0, {{0, 1, 0.0, 1}, {1, 0, 1.0, 1}}});
  auto B = update_confidence_set(fc, data, 0, cfg, 0.1, mdp);
  CHECK(B.members == std::vector<int>{0});
  // Excess of the bump: one visit at 0.8^2, minus beta.
  CHECK(B.excess[1] == doctest::Approx(0.64 - 0.1));
  CHECK(B.excess[0] == doctest::Approx(-0.1));

  AgentConfig wide = cfg;
  wide.beta = std::numeric_limits<double>::infinity();
  CHECK(update_confidence_set(fc, data, 0, wide, *wide.beta, mdp).members.size() == 2);
}

TEST_CASE("hand-stepped run on the chain, K = 3") {
  auto mdp = NonstationaryMdp::stationary(fixtures::two_state_chain(), 0, 3);
  auto fc = chain_class(mdp);
  AgentConfig cfg;
  cfg.beta = 0.1;
  Rng rng(1);
  auto run = run_swopea(mdp, fc, cfg, rng);
  // Episode 0: B = F, the bump looks better (1.8 > 1). Its greedy policy is
  // optimal, so regret stays 0, and the data removes it.
  REQUIRE(run.episodes.size() == 3);
  CHECK(run.episodes[0].member == 1);
  CHECK(run.episodes[0].optimistic_value == doctest::Approx(1.8));
  CHECK(run.episodes[0].conf_set_size == 1);
  CHECK(run.episodes[1].member == 0);
  CHECK(run.episodes[2].member == 0);
  CHECK(run.total_regret == doctest::Approx(0.0));
  CHECK(run.qstar_always_in_set);
  CHECK(run.optimism_violations == 0);
  CHECK(run.episodes[0].trajectory.steps[0].action == 1);
}

TEST_CASE("grouped loss agrees with the direct sum") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto mdp = fixtures::random_sequence({3, 2, 3}, seed, 6);
    Rng rng(seed);
    auto fc = build_realizable_class(mdp, {5, 0.4, true}, rng);
    AgentConfig cfg;
    cfg.window = 3;
    cfg.variation_oracle = VariationOracle::kZero;
    for (auto fb : {Feedback::kFullInformation, Feedback::kBandit}) {
      cfg.feedback = fb;
      SlidingWindowDataset data(3);
      for (int k = 0; k < 6; ++k) {
        Policy p(3, 3);
        for (int h = 0; h < 3; ++h)
          for (int s = 0; s < 3; ++s) p(h, s) = rng.uniform_int(2);
        data.add(sample_episode(mdp, k, p, rng));
      }
      const int k = 5;
      auto B = update_confidence_set(fc, data, k, cfg, 0.3, mdp);
      for (std::size_t i = 0; i < fc.members.size(); ++i) {
        double worst = -std::numeric_limits<double>::infinity();
        for (int h = 0; h < 3; ++h) {
          const auto rewards = mdp.episode(k).reward_table(h);
          const StepTable* rf = fb == Feedback::kFullInformation ? &rewards : nullptr;
          const auto next = fc.members[i].next_state_values(h);
          const auto slice = data.window(h, k, 3);
          double best = std::numeric_limits<double>::infinity();
          for (const auto& g : fc.aux_step(h)) best = std::min(best, sw_bellman_loss(g, next, slice, rf));
          worst = std::max(worst, sw_bellman_loss(fc.members[i].steps[h], next, slice, rf) - best - 0.3);
        }
        CHECK(B.excess[i] == doctest::Approx(worst).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("larger beta or window slack never shrinks the set") {
  auto mdp = fixtures::random_sequence({3, 2, 2}, 3, 5);
  Rng rng(3);
  auto fc = build_realizable_class(mdp, {8, 0.5, true}, rng);
  SlidingWindowDataset data(2);
  for (int k = 0; k < 5; ++k) data.add(sample_episode(mdp, k, Policy(2, 3), rng));
  AgentConfig cfg;
  cfg.window = 2;
  cfg.variation_oracle = VariationOracle::kZero;
  auto small = update_confidence_set(fc, data, 4, cfg, 0.05, mdp);
  auto big = update_confidence_set(fc, data, 4, cfg, 0.5, mdp);
  cfg.variation_oracle = VariationOracle::kExactFromEnv;
  auto slack = update_confidence_set(fc, data, 4, cfg, 0.05, mdp);
  for (int i : small.members) {
    CHECK(std::binary_search(big.members.begin(), big.members.end(), i));
    CHECK(std::binary_search(slack.members.begin(), slack.members.end(), i));
  }
}

TEST_CASE("singleton class plays optimally") {
  auto mdp = fixtures::random_stationary({3, 2, 3}, 4, 20);
  FunctionClass fc;
  fc.dims = mdp.dims();
  fc.members.push_back(from_value_tables(optimal_values(mdp, 0)));
  fc.aux_members = fc.members;
  Rng rng(0);
  auto run = run_swopea(mdp, fc, {}, rng);
  CHECK(std::abs(run.total_regret) <= 1e-10);
  CHECK(run.qstar_always_in_set);
}

TEST_CASE("runs are deterministic and regret curves nondecreasing") {
  auto mdp = fixtures::random_stationary({3, 2, 3}, 5, 40);
  Rng crng(5);
  auto fc = build_realizable_class(mdp, {10, 0.5, true}, crng);
  AgentConfig cfg;
  cfg.window = 10;
  Rng a(9);
  Rng b(9);
  auto r1 = run_swopea(mdp, fc, cfg, a);
  auto r2 = run_swopea(mdp, fc, cfg, b);
  CHECK(r1.cum_regret == r2.cum_regret);
  CHECK(r1.policies == r2.policies);
  for (std::size_t k = 0; k < r1.episodes.size(); ++k) {
    CHECK(r1.episodes[k].trajectory == r2.episodes[k].trajectory);
    CHECK(r1.episodes[k].conf_set_size == r2.episodes[k].conf_set_size);
    if (k > 0) CHECK(r1.cum_regret[k] >= r1.cum_regret[k - 1] - 1e-10);
  }
}

TEST_CASE("empty confidence set propagates with its episode") {
  auto mdp = NonstationaryMdp::stationary(fixtures::two_state_chain(), 0, 3);
  FunctionClass fc;
  fc.dims = mdp.dims();
  QFunction q = from_value_tables(optimal_values(mdp, 0));
  q.steps[0](0, 1) += 0.8;  // Q* itself is missing
  fc.members = {q};
  fc.aux_members = {q, from_value_tables(optimal_values(mdp, 0))};
  AgentConfig cfg;
  cfg.beta = 0.1;
  Rng rng(0);
  try {
    run_swopea(mdp, fc, cfg, rng);
    FAIL("expected an empty confidence set");
  } catch (const EmptyConfidenceSet& e) {
    CHECK(e.episode() == 1);
  }
}

TEST_CASE("baselines") {
  auto mdp = fixtures::random_stationary({3, 2, 3}, 6, 30);
  Rng crng(6);
  auto fc = build_realizable_class(mdp, {8, 0.5, true}, crng);
  AgentConfig cfg;

  Rng r0(1);
  auto oracle = run_baseline(mdp, fc, BaselineKind::kOracle, cfg, r0);
  CHECK(std::abs(oracle.total_regret) <= 1e-10);

  AgentConfig wk = cfg;
  wk.window = 30;
  Rng r1(2);
  Rng r2(2);
  Rng r3(2);
  auto full = run_baseline(mdp, fc, BaselineKind::kFullWindow, cfg, r1);
  auto sw = run_swopea(mdp, fc, wk, r2);
  AgentConfig rc = cfg;
  rc.restart_period = 30;
  auto restart = run_baseline(mdp, fc, BaselineKind::kRestart, rc, r3);
  CHECK(full.policies == sw.policies);
  CHECK(full.cum_regret == sw.cum_regret);
  CHECK(restart.policies == full.policies);

  rc.restart_period = 0;
  Rng r4(2);
  CHECK_THROWS(run_baseline(mdp, fc, BaselineKind::kRestart, rc, r4));

  Rng r5(2);
  auto greedy = run_baseline(mdp, fc, BaselineKind::kStationaryGreedy, cfg, r5);
  for (const auto& e : greedy.episodes) CHECK(e.conf_set_size == static_cast<int>(fc.members.size()));
}

TEST_CASE("restart resets the set") {
  auto mdp = NonstationaryMdp::stationary(fixtures::two_state_chain(), 0, 4);
  auto fc = chain_class(mdp);
  AgentConfig cfg;
  cfg.beta = 0.1;
  cfg.restart_period = 2;
  Rng rng(0);
  auto run = run_baseline(mdp, fc, BaselineKind::kRestart, cfg, rng);
  CHECK(run.episodes[0].member == 1);
  CHECK(run.episodes[1].member == 0);
  CHECK(run.episodes[2].member == 1);
}

TEST_CASE("bandit and full-information traces agree on constant rewards") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto mdp = fixtures::random_stationary({3, 2, 3}, 20 + seed, 60);
    Rng crng(seed);
    auto fc = build_realizable_class(mdp, {10, 0.5, true}, crng);
    AgentConfig full;
    full.window = 15;
    full.c = 0.05;
    AgentConfig bandit = full;
    bandit.feedback = Feedback::kBandit;
    Rng a(seed + 100);
    Rng b(seed + 100);
    auto r1 = run_swopea(mdp, fc, full, a);
    auto r2 = run_swopea(mdp, fc, bandit, b);
    CHECK(r1.policies == r2.policies);
    for (std::size_t k = 0; k < r1.episodes.size(); ++k) {
      CHECK(r1.episodes[k].conf_set_size == r2.episodes[k].conf_set_size);
      CHECK(r1.episodes[k].trajectory == r2.episodes[k].trajectory);
    }
  }
}

TEST_CASE("beta formula") {
  CHECK(beta_from_constant(0.5, 3, 100, 10, 0.2) == doctest::Approx(0.5 * 9 * std::log(100.0 * 3 * 10 / 0.2)));
  CHECK_THROWS(beta_from_constant(0.5, 3, 100, 10, 0.0));
  AgentConfig cfg;
  cfg.beta = 2.0;
  CHECK(resolve_beta(cfg, 3, 100, 10) == 2.0);
}

TEST_CASE("window choice") {
  CHECK(choose_window(0.0, 0.0, 2, 100, 4, std::log(1024.0), Feedback::kFullInformation) == 100);
  CHECK(choose_window(0.0, 0.0, 2, 100, 4, std::log(1024.0), Feedback::kBandit) == 100);
  CHECK(choose_window(0.01, 0.0, 2, 100, 4, std::log(1024.0), Feedback::kFullInformation) == 26);
  // Bandit mode adds sqrt(L_theta / H) to the drift term.
  const double root = std::sqrt(std::log(1024.0));
  const int expect = static_cast<int>(std::ceil(root / (0.1 + std::sqrt(0.02) / std::sqrt(2.0) + 0.0025)));
  CHECK(choose_window(0.01, 0.02, 2, 100, 4, std::log(1024.0), Feedback::kBandit) == expect);

  int prev = 0;
  for (double L = 0.5; L > 1e-6; L /= 2) {
    const int w = choose_window(L, 0.0, 3, 500, 2, std::log(50.0), Feedback::kFullInformation);
    CHECK(w >= prev);
    prev = w;
  }
}
