#include "swopea/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "swopea/drift.hpp"
#include "swopea/eluder.hpp"
#include "swopea/rng.hpp"

namespace swopea {

namespace fs = std::filesystem;

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("config: " + what);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() ? base / path : path;
}

std::uint64_t get_seed(const Json& j, const char* key) {
  require(j.contains(key) && j.at(key).is_number_unsigned(), std::string(key) + " must be a nonnegative integer");
  return j.at(key).get<std::uint64_t>();
}

void require_file(const Json& src, const fs::path& base, const std::string& what) {
  if (src.contains("path")) {
    require(src.at("path").is_string(), what + ".path must be a string");
    const auto p = resolve(base, src.at("path").get<std::string>());
    require(fs::exists(p), what + " file not found: " + p.string());
  }
}

AgentSpec parse_agent(const Json& j) {
  require(j.is_object(), "agent entries must be objects");
  AgentSpec a;
  require(j.contains("name") && j.at("name").is_string(), "agent needs a name");
  a.name = j.at("name").get<std::string>();
  require(!a.name.empty() && a.name.find_first_of("/\\ ") == std::string::npos,
          "agent name must be nonempty without spaces or slashes");
  a.algorithm = j.value("algorithm", std::string("swopea"));
  if (a.algorithm != "swopea") baseline_from_string(a.algorithm);  // throws on unknown names

  if (!j.contains("window") || j.at("window") == "full") {
    a.window_policy = WindowPolicy::kFull;
  } else if (j.at("window") == "corollary") {
    a.window_policy = WindowPolicy::kCorollary;
  } else {
    require(j.at("window").is_number_integer(), "window must be an integer, \"full\" or \"corollary\"");
    a.window_policy = WindowPolicy::kFixed;
    a.window = j.at("window").get<int>();
    require(a.window >= 0, "window must be nonnegative");
  }

  if (j.contains("beta")) {
    const auto& b = j.at("beta");
    if (b.is_number()) {
      a.config.beta = b.get<double>();
      require(*a.config.beta >= 0.0, "beta must be nonnegative");
    } else {
      require(b.is_object(), "beta must be a number or {c, delta}");
      a.config.c = b.value("c", a.config.c);
      a.config.delta = b.value("delta", a.config.delta);
      require(a.config.c >= 0.0 && a.config.delta > 0.0 && a.config.delta < 1.0, "need c >= 0, delta in (0,1)");
    }
  }
  if (j.contains("feedback")) a.config.feedback = feedback_from_string(j.at("feedback").get<std::string>());
  if (j.contains("variation_oracle")) {
    a.config.variation_oracle = variation_oracle_from_string(j.at("variation_oracle").get<std::string>());
  }
  a.config.restart_period = j.value("restart_period", 0);
  require(a.config.restart_period >= 0, "restart_period must be nonnegative");
  if (a.algorithm == "restart") require(a.config.restart_period >= 1, "restart agents need restart_period >= 1");
  return a;
}

EpisodeModel model_from_source(const Json& src, const fs::path& base, Dims dims, std::uint64_t salt) {
  if (src.contains("path")) {
    auto mdp = mdp_from_json(read_json_file(resolve(base, src.at("path").get<std::string>())));
    require(mdp.dims() == dims, "model file dimensions differ from the generator");
    return mdp.episode(0);
  }
  Rng rng(derive_seed(get_seed(src, "seed"), salt));
  return random_episode_model(dims, rng, src.value("support", 0));
}

NonstationaryMdp build_mdp(const Json& src, const fs::path& base) {
  if (src.contains("path")) return mdp_from_json(read_json_file(resolve(base, src.at("path").get<std::string>())));
  require(src.contains("generator"), "mdp needs path or generator");
  const Json& g = src.at("generator");
  const Dims dims{g.at("n_states").get<int>(), g.at("n_actions").get<int>(), g.at("horizon").get<int>()};
  require(dims.n_states > 0 && dims.n_actions > 0 && dims.horizon > 0, "generator dimensions must be positive");
  const int n_episodes = g.at("n_episodes").get<int>();
  require(n_episodes >= 1, "n_episodes must be >= 1");
  const int x1 = g.value("initial_state", 0);
  require(x1 >= 0 && x1 < dims.n_states, "initial_state out of range");
  const EpisodeModel base_model = model_from_source(g.contains("base") ? g.at("base") : g, base, dims, 0);

  if (!g.contains("drift") || g.at("drift").value("kind", std::string("none")) == "none") {
    return NonstationaryMdp::stationary(base_model, x1, n_episodes);
  }
  const Json& d = g.at("drift");
  DriftSpec spec;
  spec.kind = drift_kind_from_string(d.at("kind").get<std::string>());
  spec.n_episodes = n_episodes;
  spec.switch_episode = d.value("switch_episode", n_episodes / 2);
  spec.per_step_l1 = d.value("per_step_l1", 0.0);
  if (spec.kind != DriftKind::kRandomWalk) {
    require(d.contains("target"), "drift kind needs a target");
    spec.target = model_from_source(d.at("target"), base, dims, 1);
  }
  Rng rng(derive_seed(d.value("seed", std::uint64_t{0}), 2));
  auto mdp = generate_drift(spec, base_model, x1, rng);
  const auto report = validate(mdp);
  require(report.ok(), "generated mdp failed validation (" + (report.ok() ? "" : report.violations.front().kind) + ")");
  return mdp;
}

FunctionClass build_class(const Json& src, const fs::path& base, const NonstationaryMdp& mdp) {
  FunctionClass fc;
  if (src.contains("path")) {
    fc = function_class_from_json(read_json_file(resolve(base, src.at("path").get<std::string>())));
    require(fc.dims == mdp.dims(), "function class dimensions differ from the mdp");
    return fc;
  }
  require(src.contains("build"), "function_class needs path or build");
  const Json& b = src.at("build");
  ClassBuildOptions opts;
  opts.n_distractors = b.value("n_distractors", 0);
  opts.perturb_scale = b.value("perturb_scale", 0.0);
  opts.closure = b.value("closure", true);
  Rng rng(derive_seed(b.value("seed", std::uint64_t{0}), 0));
  return build_realizable_class(mdp, opts, rng);
}

Json environment_json(const Environment& env) {
  const auto budgets = variation_budgets(env.mdp);
  const auto avg = average_variation(env.mdp);
  return {{"n_states", env.mdp.n_states()},
          {"n_actions", env.mdp.n_actions()},
          {"horizon", env.mdp.horizon()},
          {"n_episodes", env.mdp.n_episodes()},
          {"initial_state", env.mdp.initial_state()},
          {"delta_r", budgets.delta_r},
          {"delta_p", budgets.delta_p},
          {"L", avg.l},
          {"L_theta", avg.l_theta},
          {"class_size", env.fc.members.size()},
          {"aux_size", env.fc.aux_members.size()},
          {"provenance", env.fc.provenance},
          {"clipped_backups", env.fc.clipped_backups},
          {"realizable", check_realizability(env.fc, env.mdp, 1e-9).passed}};
}

std::string run_stem(const std::string& agent, std::uint64_t seed) {
  return agent + "__seed" + std::to_string(seed);
}

RunResult execute(const Environment& env, const AgentSpec& spec, std::optional<int> window,
                  std::uint64_t seed) {
  AgentConfig cfg = spec.config;
  cfg.window = window;
  Rng rng(derive_seed(seed, fnv1a(spec.name)));
  RunResult run = spec.algorithm == "swopea"
                      ? run_swopea(env.mdp, env.fc, cfg, rng)
                      : run_baseline(env.mdp, env.fc, baseline_from_string(spec.algorithm), cfg, rng);
  run.seed = seed;
  return run;
}

template <class Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  const std::size_t n_threads = std::min<std::size_t>(std::max(1, workers), n);
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

ExperimentConfig parse_config(const Json& j, const fs::path& base_dir) {
  require(j.is_object(), "top level must be an object");
  require(j.value("schema_version", 0) == 1, "schema_version must be 1");
  ExperimentConfig c;
  c.base_dir = base_dir;
  require(j.contains("mdp") && j.at("mdp").is_object(), "missing mdp");
  require(j.contains("function_class") && j.at("function_class").is_object(), "missing function_class");
  c.mdp = j.at("mdp");
  c.function_class = j.at("function_class");
  require_file(c.mdp, base_dir, "mdp");
  require_file(c.function_class, base_dir, "function_class");
  if (c.mdp.contains("generator")) {
    const Json& g = c.mdp.at("generator");
    for (const char* key : {"base", "drift"}) {
      if (!g.contains(key)) continue;
      require_file(g.at(key), base_dir, key);
      if (g.at(key).contains("target")) require_file(g.at(key).at("target"), base_dir, "drift target");
    }
  }

  require(j.contains("agents") && j.at("agents").is_array() && !j.at("agents").empty(), "need at least one agent");
  std::set<std::string> names;
  for (const auto& a : j.at("agents")) {
    c.agents.push_back(parse_agent(a));
    require(names.insert(c.agents.back().name).second, "duplicate agent name " + c.agents.back().name);
  }
  require(j.contains("seeds") && j.at("seeds").is_array() && !j.at("seeds").empty(), "need at least one seed");
  for (const auto& s : j.at("seeds")) {
    require(s.is_number_unsigned(), "seeds must be nonnegative integers");
    c.seeds.push_back(s.get<std::uint64_t>());
  }
  c.output_dir = resolve(base_dir, j.value("output_dir", std::string("out")));
  c.workers = j.value("workers", 1);
  require(c.workers >= 1, "workers must be >= 1");
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  auto config = parse_config(read_json_file(path), path.has_parent_path() ? path.parent_path() : fs::path("."));
  if (const char* dir = std::getenv("SWOPEA_OUTPUT_DIR"); dir != nullptr && *dir != '\0') {
    config.output_dir = dir;
  }
  return config;
}

Environment build_environment(const ExperimentConfig& config) {
  auto mdp = build_mdp(config.mdp, config.base_dir);
  auto fc = build_class(config.function_class, config.base_dir, mdp);
  return {std::move(mdp), std::move(fc)};
}

int corollary_window(const Environment& env, Feedback feedback) {
  const int n_episodes = env.mdp.n_episodes();
  EluderOptions opts;
  opts.method = DeMethod::kGreedy;
  const auto dbe = dbe_dimension(env.fc, env.mdp, std::sqrt(1.0 / n_episodes), opts);
  const int d = std::max(1, dbe.value);
  const auto avg = average_variation(env.mdp);
  const double log_g = std::log(static_cast<double>(std::max<std::size_t>(env.fc.aux_members.size(), 1)));
  return choose_window(avg.l, avg.l_theta, env.mdp.horizon(), n_episodes, d, log_g, feedback);
}

double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

Json ExperimentSummary::to_json() const {
  Json agents_j = Json::array();
  for (const auto& a : agents) {
    agents_j.push_back({{"name", a.name},
                        {"n_runs", a.n_runs},
                        {"n_errors", a.n_errors},
                        {"median_regret", a.median_regret},
                        {"q1_regret", a.q1_regret},
                        {"q3_regret", a.q3_regret},
                        {"iqr_regret", a.q3_regret - a.q1_regret},
                        {"qstar_always_rate", a.qstar_always_rate}});
  }
  Json runs_j = Json::array();
  for (const auto& r : runs) {
    Json e = {{"agent", r.agent}, {"seed", r.seed}, {"ok", r.ok}};
    if (r.ok) {
      e["total_regret"] = r.total_regret;
      e["qstar_always_in_set"] = r.qstar_always_in_set;
      e["optimism_violations"] = r.optimism_violations;
      e["mean_conf_set_size"] = r.mean_conf_set_size;
      e["window"] = r.window;
      e["beta"] = std::isfinite(r.beta) ? Json(r.beta) : Json(nullptr);
      e["curve"] = r.curve_path;
    } else {
      e["error"] = r.error;
    }
    runs_j.push_back(std::move(e));
  }
  return {{"schema_version", 1}, {"environment", environment}, {"agents", std::move(agents_j)},
          {"runs", std::move(runs_j)}};
}

bool ExperimentSummary::any_error() const {
  return std::any_of(runs.begin(), runs.end(), [](const RunRecord& r) { return !r.ok; });
}

ExperimentSummary run_experiment(const ExperimentConfig& config, bool write_outputs) {
  const Environment env = build_environment(config);
  std::map<Feedback, int> corollary;
  for (const auto& a : config.agents) {
    if (a.window_policy == WindowPolicy::kCorollary && !corollary.contains(a.config.feedback)) {
      corollary[a.config.feedback] = corollary_window(env, a.config.feedback);
    }
  }

  const std::size_t n_seeds = config.seeds.size();
  ExperimentSummary summary;
  summary.environment = environment_json(env);
  summary.runs.resize(config.agents.size() * n_seeds);

  parallel_for(summary.runs.size(), config.workers, [&](std::size_t i) {
    const AgentSpec& spec = config.agents[i / n_seeds];
    const std::uint64_t seed = config.seeds[i % n_seeds];
    RunRecord& rec = summary.runs[i];
    rec.agent = spec.name;
    rec.seed = seed;
    std::optional<int> window;
    if (spec.window_policy == WindowPolicy::kFixed) window = spec.window;
    if (spec.window_policy == WindowPolicy::kCorollary) window = corollary.at(spec.config.feedback);
    const std::string stem = run_stem(spec.name, seed);
    try {
      const RunResult run = execute(env, spec, window, seed);
      rec.total_regret = run.total_regret;
      rec.qstar_always_in_set = run.qstar_always_in_set;
      rec.optimism_violations = run.optimism_violations;
      rec.mean_conf_set_size = run.mean_conf_set_size();
      rec.window = run.window;
      rec.beta = run.beta;
      rec.curve_path = "runs/" + stem + ".csv";
      if (write_outputs) {
        Json j = swopea::to_json(run);
        j["agent"] = spec.name;
        write_json_file(config.output_dir / "runs" / (stem + ".json"), j);
        write_text_file(config.output_dir / rec.curve_path, regret_csv(run));
      }
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
      if (write_outputs) {
        write_json_file(config.output_dir / "runs" / (stem + ".json"),
                        {{"agent", spec.name}, {"seed", seed}, {"error", rec.error}});
      }
    }
  });

  for (std::size_t a = 0; a < config.agents.size(); ++a) {
    AgentSummary s;
    s.name = config.agents[a].name;
    std::vector<double> regrets;
    int always = 0;
    for (std::size_t k = 0; k < n_seeds; ++k) {
      const auto& r = summary.runs[a * n_seeds + k];
      ++s.n_runs;
      if (!r.ok) {
        ++s.n_errors;
        continue;
      }
      regrets.push_back(r.total_regret);
      always += r.qstar_always_in_set ? 1 : 0;
    }
    if (!regrets.empty()) {
      s.median_regret = quantile(regrets, 0.5);
      s.q1_regret = quantile(regrets, 0.25);
      s.q3_regret = quantile(regrets, 0.75);
      s.qstar_always_rate = static_cast<double>(always) / static_cast<double>(regrets.size());
    }
    summary.agents.push_back(std::move(s));
  }
  if (write_outputs) write_json_file(config.output_dir / "summary.json", summary.to_json());
  return summary;
}

std::vector<SweepRow> sweep_window(const ExperimentConfig& config, const std::vector<int>& ws) {
  if (ws.size() < 2) throw std::invalid_argument("sweep_window needs at least two window values");
  const auto tmpl = std::find_if(config.agents.begin(), config.agents.end(),
                                 [](const AgentSpec& a) { return a.algorithm == "swopea"; });
  if (tmpl == config.agents.end()) throw std::invalid_argument("sweep_window needs a swopea agent");
  ExperimentConfig sweep = config;
  sweep.agents.clear();
  for (int w : ws) {
    if (w < 0) throw std::invalid_argument("window values must be nonnegative");
    AgentSpec a = *tmpl;  // same name, so every w sees the same random stream
    a.window_policy = WindowPolicy::kFixed;
    a.window = w;
    sweep.agents.push_back(std::move(a));
  }
  const auto summary = run_experiment(sweep, false);
  std::vector<SweepRow> rows;
  std::ostringstream csv;
  csv << "w,median_regret,q1_regret,q3_regret,n_runs,n_errors\n";
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const auto& s = summary.agents[i];
    rows.push_back({ws[i], s.n_runs, s.n_errors, s.median_regret, s.q1_regret, s.q3_regret});
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%d,%d\n", ws[i], s.median_regret, s.q1_regret,
                  s.q3_regret, s.n_runs, s.n_errors);
    csv << buf;
  }
  write_text_file(config.output_dir / "sweep_window.csv", csv.str());
  return rows;
}

std::map<std::string, std::string> output_hashes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    out[fs::relative(entry.path(), dir).generic_string()] = file_hash(entry.path());
  }
  return out;
}

std::string combined_hash(const std::map<std::string, std::string>& hashes) {
  std::string joined;
  for (const auto& [path, h] : hashes) joined += path + '\0' + h + '\n';
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(joined)));
  return buf;
}

}  // namespace swopea
