#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "swopea/harness.hpp"

using namespace swopea;
namespace fs = std::filesystem;

namespace {

Json small_config(const std::string& out) {
  Json j = Json::parse(R"({
    "schema_version": 1,
    "mdp": {"generator": {"n_states": 2, "n_actions": 2, "horizon": 2, "n_episodes": 40,
                          "initial_state": 0, "seed": 4, "support": 2}},
    "function_class": {"build": {"n_distractors": 4, "perturb_scale": 0.5, "seed": 1}},
    "agents": [
      {"name": "sw", "window": 8, "beta": {"c": 0.5, "delta": 0.2}},
      {"name": "oracle", "algorithm": "oracle"}
    ],
    "seeds": [1, 2, 3],
    "workers": 2
  })");
  j["output_dir"] = out;
  return j;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("swopea_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("quantile interpolates") {
  CHECK(quantile({3.0}, 0.5) == 3.0);
  CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.25) == doctest::Approx(2.0));
  CHECK(quantile({1.0, 2.0}, 1.0) == 2.0);
}

TEST_CASE("config schema errors") {
  const auto base = fs::temp_directory_path();
  auto c = small_config("out");
  CHECK_NOTHROW(parse_config(c, base));

  auto v = c;
  v["schema_version"] = 2;
  CHECK_THROWS_AS(parse_config(v, base), std::invalid_argument);

  auto no_agents = c;
  no_agents.erase("agents");
  CHECK_THROWS_AS(parse_config(no_agents, base), std::invalid_argument);

  auto dup = c;
  dup["agents"][1]["name"] = "sw";
  CHECK_THROWS_AS(parse_config(dup, base), std::invalid_argument);

  auto bad_window = c;
  bad_window["agents"][0]["window"] = "wide";
  CHECK_THROWS_AS(parse_config(bad_window, base), std::invalid_argument);

  auto bad_algo = c;
  bad_algo["agents"][0]["algorithm"] = "ucb";
  CHECK_THROWS_AS(parse_config(bad_algo, base), std::invalid_argument);

  auto missing_file = c;
  missing_file["mdp"] = {{"path", "no_such_mdp.json"}};
  CHECK_THROWS_AS(parse_config(missing_file, base), std::invalid_argument);

  auto restart = c;
  restart["agents"][0] = {{"name", "r"}, {"algorithm", "restart"}};
  CHECK_THROWS_AS(parse_config(restart, base), std::invalid_argument);
}

TEST_CASE("experiment outputs and summary agree") {
  const auto dir = scratch("run");
  const auto config = parse_config(small_config(dir.string()), fs::temp_directory_path());
  const auto summary = run_experiment(config);
  REQUIRE_FALSE(summary.any_error());
  REQUIRE(summary.runs.size() == 6);
  REQUIRE(summary.agents.size() == 2);

  // Oracle plays the optimal policy of every episode.
  for (const auto& r : summary.runs) {
    if (r.agent == "oracle") CHECK(r.total_regret == doctest::Approx(0.0).epsilon(1e-12));
  }

  // Recompute the SW-OPEA aggregates from the per-run CSVs.
  std::vector<double> totals;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto csv = slurp(dir / "runs" / ("sw__seed" + std::to_string(seed) + ".csv"));
    std::istringstream lines(csv);
    std::string line, last;
    std::getline(lines, line);
    CHECK(line == "episode,regret_increment,cum_regret,conf_set_size,qstar_in_set");
    int n = 0;
    while (std::getline(lines, line)) {
      last = line;
      ++n;
    }
    CHECK(n == 40);
    std::istringstream cells(last);
    std::string cell;
    std::getline(cells, cell, ',');
    std::getline(cells, cell, ',');
    std::getline(cells, cell, ',');
    totals.push_back(std::stod(cell));
  }
  const auto& sw = summary.agents[0];
  CHECK(sw.name == "sw");
  CHECK(sw.median_regret == doctest::Approx(quantile(totals, 0.5)).epsilon(1e-12));
  CHECK(sw.q1_regret == doctest::Approx(quantile(totals, 0.25)).epsilon(1e-12));

  const auto written = read_json_file(dir / "summary.json");
  CHECK(written["schema_version"] == 1);
  CHECK(written["runs"].size() == 6);
  fs::remove_all(dir);
}

TEST_CASE("reruns write identical files") {
  const auto dir = scratch("rerun");
  auto config = parse_config(small_config(dir.string()), fs::temp_directory_path());
  run_experiment(config);
  const auto first = output_hashes(dir);
  config.workers = 1;
  run_experiment(config);
  CHECK(output_hashes(dir) == first);
  CHECK(combined_hash(first) == combined_hash(output_hashes(dir)));
  fs::remove_all(dir);
}

TEST_CASE("a failing run is recorded and the rest complete") {
  const auto dir = scratch("fail");
  fs::create_directories(dir);
  const auto mdp = fixtures::random_stationary({2, 2, 2}, 7, 20);
  write_json_file(dir / "mdp.json", to_json(mdp));
  // Only member is the zero function; the aux class holds Q*, so a zero
  // threshold leaves nothing after the first data arrive.
  FunctionClass fc;
  fc.dims = mdp.dims();
  QFunction zero;
  for (int h = 0; h < 2; ++h) zero.steps.emplace_back(2, 2);
  fc.members = {zero};
  fc.aux_members = {zero, from_value_tables(optimal_values(mdp, 0))};
  write_json_file(dir / "class.json", to_json(fc));

  Json j = {{"schema_version", 1},
            {"mdp", {{"path", "mdp.json"}}},
            {"function_class", {{"path", "class.json"}}},
            {"agents", Json::array({{{"name", "sw"}, {"beta", 0.0}, {"variation_oracle", "zero"}},
                                    {{"name", "oracle"}, {"algorithm", "oracle"}}})},
            {"seeds", {1u, 2u}},
            {"output_dir", "out"}};
  const auto summary = run_experiment(parse_config(j, dir));
  CHECK(summary.any_error());
  CHECK(summary.agents[0].n_errors == 2);
  CHECK(summary.agents[1].n_errors == 0);
  CHECK_FALSE(summary.runs[0].error.empty());
  fs::remove_all(dir);
}

TEST_CASE("output directory override") {
  const auto dir = scratch("override");
  fs::create_directories(dir);
  write_json_file(dir / "config.json", small_config("ignored"));
  const auto target = dir / "elsewhere";
  setenv("SWOPEA_OUTPUT_DIR", target.c_str(), 1);
  const auto config = load_config(dir / "config.json");
  unsetenv("SWOPEA_OUTPUT_DIR");
  CHECK(config.output_dir == target);
  CHECK(load_config(dir / "config.json").output_dir == dir / "ignored");
  fs::remove_all(dir);
}

TEST_CASE("window sweep") {
  const auto dir = scratch("sweep");
  const auto config = parse_config(small_config(dir.string()), fs::temp_directory_path());
  CHECK_THROWS_AS(sweep_window(config, {4}), std::invalid_argument);
  const auto rows = sweep_window(config, {2, 40});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].w == 2);
  CHECK(rows[1].n_runs == 3);
  CHECK(fs::exists(dir / "sweep_window.csv"));
  fs::remove_all(dir);
}
