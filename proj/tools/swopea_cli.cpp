// swopea command-line entry point. Exit codes: 0 ok, 1 run error, 2 failed verification.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "swopea/eluder.hpp"
#include "swopea/harness.hpp"
#include "swopea/io.hpp"
#include "swopea/verify.hpp"

using namespace swopea;

namespace {

int cmd_run(const std::string& path, int workers) {
  auto config = load_config(path);
  if (workers > 0) config.workers = workers;
  const auto summary = run_experiment(config);
  for (const auto& a : summary.agents) {
    std::printf("%-24s runs=%d errors=%d median=%.4f iqr=[%.4f, %.4f] qstar_always=%.2f\n", a.name.c_str(),
                a.n_runs, a.n_errors, a.median_regret, a.q1_regret, a.q3_regret, a.qstar_always_rate);
  }
  for (const auto& r : summary.runs) {
    if (!r.ok) std::fprintf(stderr, "error: %s seed %llu: %s\n", r.agent.c_str(),
                            static_cast<unsigned long long>(r.seed), r.error.c_str());
  }
  std::printf("output: %s\nhash: %s\n", config.output_dir.string().c_str(),
              combined_hash(output_hashes(config.output_dir)).c_str());
  return summary.any_error() ? 1 : 0;
}

int cmd_verify(const std::string& suite, int trials, std::uint64_t seed) {
  std::vector<std::string> suites = suite == "all" ? verify_suites() : std::vector<std::string>{suite};
  bool ok = true;
  Json out = Json::array();
  for (const auto& s : suites) {
    const auto report = run_verify(s, trials, seed);
    ok = ok && report.passed;
    out.push_back(to_json(report));
  }
  std::cout << (out.size() == 1 ? out[0] : out).dump(2) << "\n";
  return ok ? 0 : 2;
}

int cmd_eluder(const std::string& class_path, const std::string& mdp_path, double eps,
               const std::string& method, const std::string& rule, int cap, int episode) {
  const auto fc = function_class_from_json(read_json_file(class_path));
  const auto mdp = mdp_from_json(read_json_file(mdp_path));
  EluderOptions opts;
  opts.method = de_method_from_string(method);
  opts.rule = eps_rule_from_string(rule);
  opts.cap = cap;
  const auto result = episode >= 0 ? be_dimension(fc, mdp, episode, eps, opts) : dbe_dimension(fc, mdp, eps, opts);
  Json j = to_json(result);
  j["kind"] = episode >= 0 ? "be" : "dbe";
  j["eps"] = eps;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const std::string& path, const std::vector<int>& ws, int workers) {
  auto config = load_config(path);
  if (workers > 0) config.workers = workers;
  const auto rows = sweep_window(config, ws);
  int errors = 0;
  for (const auto& r : rows) {
    std::printf("w=%-6d median=%.4f iqr=[%.4f, %.4f] errors=%d\n", r.w, r.median_regret, r.q1_regret,
                r.q3_regret, r.n_errors);
    errors += r.n_errors;
  }
  std::printf("wrote %s\n", (config.output_dir / "sweep_window.csv").string().c_str());
  return errors > 0 ? 1 : 0;
}

int cmd_budgets(const std::string& path, int w) {
  const auto mdp = mdp_from_json(read_json_file(path));
  const auto b = variation_budgets(mdp);
  const auto avg = average_variation(mdp);
  Json j = {{"delta_r", b.delta_r}, {"delta_p", b.delta_p}, {"L", avg.l}, {"L_theta", avg.l_theta}};
  if (w >= 0) {
    Json local = Json::array();
    for (int k = 0; k < mdp.n_episodes(); ++k) {
      Json row = Json::array();
      for (int h = 0; h < mdp.horizon(); ++h) {
        const auto lv = local_variation(mdp, k, h, w);
        row.push_back({{"delta_p_w", lv.delta_p_w}, {"delta_r_w", lv.delta_r_w}});
      }
      local.push_back(std::move(row));
    }
    j["w"] = w;
    j["local"] = std::move(local);
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_export(const std::string& path, const std::string& out_dir) {
  const auto config = load_config(path);
  const auto env = build_environment(config);
  const std::filesystem::path dir = out_dir.empty() ? config.output_dir : std::filesystem::path(out_dir);
  write_json_file(dir / "mdp.json", to_json(env.mdp));
  write_json_file(dir / "class.json", to_json(env.fc));
  std::printf("wrote %s and %s\n", (dir / "mdp.json").string().c_str(), (dir / "class.json").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sliding-window optimistic exploration for non-stationary episodic MDPs"};
  app.require_subcommand(1);

  std::string config_path;
  int workers = 0;
  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config_path, "Experiment config JSON")->required();
  run->add_option("--workers", workers, "Override the worker count");

  std::string suite = "all";
  int trials = 0;
  std::uint64_t seed = 0;
  auto* verify = app.add_subcommand("verify", "Numeric property suites");
  verify->add_option("--suite", suite, "Suite name or all")->default_val("all");
  verify->add_option("--trials", trials, "Trials (0: suite default)");
  verify->add_option("--seed", seed, "Master seed");

  std::string class_path, mdp_path, method = "exact", rule = "per_element";
  double eps = 0.5;
  int cap = 12, episode = -1;
  auto* eluder = app.add_subcommand("eluder", "DBE (or per-episode BE) dimension of a class");
  eluder->add_option("class", class_path, "Function class JSON")->required();
  eluder->add_option("--mdp", mdp_path, "MDP JSON")->required();
  eluder->add_option("--eps", eps, "Scale eps > 0");
  eluder->add_option("--method", method, "exact or greedy")->check(CLI::IsMember({"exact", "greedy"}));
  eluder->add_option("--rule", rule, "per_element or shared")->check(CLI::IsMember({"per_element", "shared"}));
  eluder->add_option("--cap", cap, "Longest sequence the exact search explores");
  eluder->add_option("--episode", episode, "BE dimension of one episode (0-based)");

  std::vector<int> ws;
  auto* sweep = app.add_subcommand("sweep-window", "Median SW-OPEA regret per window size");
  sweep->add_option("config", config_path, "Experiment config JSON")->required();
  sweep->add_option("--ws", ws, "Window sizes, comma separated")->delimiter(',')->required();
  sweep->add_option("--workers", workers, "Override the worker count");

  std::string budget_path;
  int w = -1;
  auto* budgets = app.add_subcommand("budgets", "Variation budgets of an MDP");
  budgets->add_option("mdp", budget_path, "MDP JSON")->required();
  budgets->add_option("--w", w, "Also print local budgets for this window");

  std::string export_dir;
  auto* exp = app.add_subcommand("export", "Write the config's MDP and class as JSON");
  exp->add_option("config", config_path, "Experiment config JSON")->required();
  exp->add_option("--out", export_dir, "Target directory (default: output_dir)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config_path, workers);
    if (*verify) return cmd_verify(suite, trials, seed);
    if (*eluder) return cmd_eluder(class_path, mdp_path, eps, method, rule, cap, episode);
    if (*sweep) return cmd_sweep(config_path, ws, workers);
    if (*budgets) return cmd_budgets(budget_path, w);
    if (*exp) return cmd_export(config_path, export_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
