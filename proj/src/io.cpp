#include "swopea/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "swopea/rng.hpp"

namespace swopea {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

int get_int(const Json& j, const char* key) {
  require(j.contains(key) && j.at(key).is_number_integer(), std::string("missing integer field ") + key);
  return j.at(key).get<int>();
}

Json table_json(const StepTable& t) {
  Json rows = Json::array();
  for (int s = 0; s < t.n_states(); ++s) {
    auto r = t.row(s);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

StepTable table_from_json(const Json& j, int n_states, int n_actions, const std::string& where) {
  require(j.is_array() && static_cast<int>(j.size()) == n_states, where + ": expected " +
                                                                     std::to_string(n_states) + " rows");
  StepTable t(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    const auto& row = j[s];
    require(row.is_array() && static_cast<int>(row.size()) == n_actions,
            where + ": expected " + std::to_string(n_actions) + " actions");
    for (int a = 0; a < n_actions; ++a) {
      require(row[a].is_number(), where + ": non-numeric entry");
      t(s, a) = row[a].get<double>();
    }
  }
  return t;
}

Json finite_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

}  // namespace

Json to_json(const EpisodeModel& model) {
  const Dims d = model.dims();
  Json trans = Json::array();
  Json rew = Json::array();
  for (int h = 0; h < d.horizon; ++h) {
    Json th = Json::array();
    for (int s = 0; s < d.n_states; ++s) {
      Json ts = Json::array();
      for (int a = 0; a < d.n_actions; ++a) {
        auto r = model.row(h, s, a);
        ts.push_back(std::vector<double>(r.begin(), r.end()));
      }
      th.push_back(std::move(ts));
    }
    trans.push_back(std::move(th));
    rew.push_back(table_json(model.reward_table(h)));
  }
  return {{"transitions", std::move(trans)}, {"rewards", std::move(rew)}};
}

EpisodeModel episode_from_json(const Json& j, Dims d) {
  require(j.contains("transitions") && j.contains("rewards"), "episode needs transitions and rewards");
  const auto& tj = j.at("transitions");
  const auto& rj = j.at("rewards");
  require(tj.is_array() && static_cast<int>(tj.size()) == d.horizon, "transitions: wrong horizon");
  require(rj.is_array() && static_cast<int>(rj.size()) == d.horizon, "rewards: wrong horizon");
  EpisodeModel m(d);
  for (int h = 0; h < d.horizon; ++h) {
    const auto r = table_from_json(rj[h], d.n_states, d.n_actions, "rewards");
    require(tj[h].is_array() && static_cast<int>(tj[h].size()) == d.n_states, "transitions: wrong state count");
    for (int s = 0; s < d.n_states; ++s) {
      require(tj[h][s].is_array() && static_cast<int>(tj[h][s].size()) == d.n_actions,
              "transitions: wrong action count");
      for (int a = 0; a < d.n_actions; ++a) {
        const auto& row = tj[h][s][a];
        require(row.is_array() && static_cast<int>(row.size()) == d.n_states,
                "transitions: wrong next-state count");
        auto out = m.mutable_row(h, s, a);
        for (int n = 0; n < d.n_states; ++n) out[n] = row[n].get<double>();
        m.mutable_reward(h, s, a) = r(s, a);
      }
    }
  }
  return m;
}

Json to_json(const NonstationaryMdp& mdp) {
  Json trans = Json::array();
  Json rew = Json::array();
  for (int k = 0; k < mdp.n_episodes(); ++k) {
    Json e = to_json(mdp.episode(k));
    trans.push_back(std::move(e["transitions"]));
    rew.push_back(std::move(e["rewards"]));
  }
  return {{"n_states", mdp.n_states()},   {"n_actions", mdp.n_actions()},
          {"horizon", mdp.horizon()},     {"n_episodes", mdp.n_episodes()},
          {"initial_state", mdp.initial_state()}, {"transitions", std::move(trans)},
          {"rewards", std::move(rew)}};
}

NonstationaryMdp mdp_from_json(const Json& j) {
  require(j.is_object(), "mdp must be a JSON object");
  const Dims d{get_int(j, "n_states"), get_int(j, "n_actions"), get_int(j, "horizon")};
  require(d.n_states > 0 && d.n_actions > 0 && d.horizon > 0, "dimensions must be positive");
  const int n_episodes = get_int(j, "n_episodes");
  require(n_episodes > 0, "n_episodes must be positive");
  const auto& tj = j.at("transitions");
  const auto& rj = j.at("rewards");
  require(tj.is_array() && rj.is_array() && tj.size() == rj.size(), "transitions/rewards length mismatch");
  const int listed = static_cast<int>(tj.size());
  require(listed == n_episodes || listed == 1, "expected n_episodes or 1 listed episodes");

  std::vector<std::shared_ptr<const EpisodeModel>> episodes;
  for (int k = 0; k < listed; ++k) {
    episodes.push_back(std::make_shared<const EpisodeModel>(
        episode_from_json({{"transitions", tj[k]}, {"rewards", rj[k]}}, d)));
  }
  while (static_cast<int>(episodes.size()) < n_episodes) episodes.push_back(episodes.front());
  NonstationaryMdp mdp(d, get_int(j, "initial_state"), std::move(episodes));
  const auto report = validate(mdp);
  if (!report.ok()) {
    const auto& v = report.violations.front();
    throw std::invalid_argument("invalid mdp: " + v.kind + " at episode " + std::to_string(v.episode) +
                                " step " + std::to_string(v.step) + " state " + std::to_string(v.state) +
                                " action " + std::to_string(v.action));
  }
  return mdp;
}

Json to_json(const QFunction& f) {
  Json steps = Json::array();
  for (const auto& t : f.steps) steps.push_back(table_json(t));
  return steps;
}

QFunction qfunction_from_json(const Json& j, Dims d) {
  require(j.is_array() && static_cast<int>(j.size()) == d.horizon, "member: wrong horizon");
  QFunction f;
  for (int h = 0; h < d.horizon; ++h) f.steps.push_back(table_from_json(j[h], d.n_states, d.n_actions, "member"));
  return f;
}

Json to_json(const FunctionClass& fc) {
  Json members = Json::array();
  for (const auto& f : fc.members) members.push_back(to_json(f));
  Json aux = Json::array();
  for (const auto& f : fc.aux_members) aux.push_back(to_json(f));
  return {{"n_states", fc.dims.n_states},
          {"n_actions", fc.dims.n_actions},
          {"horizon", fc.dims.horizon},
          {"provenance", fc.provenance},
          {"clipped_backups", fc.clipped_backups},
          {"members", std::move(members)},
          {"aux_members", std::move(aux)}};
}

FunctionClass function_class_from_json(const Json& j) {
  require(j.is_object(), "function class must be a JSON object");
  FunctionClass fc;
  fc.dims = {get_int(j, "n_states"), get_int(j, "n_actions"), get_int(j, "horizon")};
  require(j.contains("members") && j.at("members").is_array(), "missing members");
  for (const auto& m : j.at("members")) fc.members.push_back(qfunction_from_json(m, fc.dims));
  if (j.contains("aux_members")) {
    for (const auto& m : j.at("aux_members")) fc.aux_members.push_back(qfunction_from_json(m, fc.dims));
  } else {
    fc.aux_members = fc.members;
  }
  fc.provenance = j.value("provenance", std::string("file"));
  fc.clipped_backups = j.value("clipped_backups", false);
  check_class_shape(fc);
  return fc;
}

Json to_json(const RunResult& run) {
  std::vector<double> inc, opt_val;
  std::vector<int> members, sizes;
  std::vector<bool> in_set;
  for (const auto& e : run.episodes) {
    inc.push_back(e.regret_increment);
    opt_val.push_back(e.optimistic_value);
    members.push_back(e.member);
    sizes.push_back(e.conf_set_size);
    in_set.push_back(e.qstar_in_set);
  }
  return {{"algorithm", run.algorithm},
          {"seed", run.seed},
          {"beta", finite_or_null(run.beta)},
          {"window", run.window},
          {"feedback", to_string(run.feedback)},
          {"n_episodes", run.episodes.size()},
          {"total_regret", run.total_regret},
          {"qstar_always_in_set", run.qstar_always_in_set},
          {"optimism_violations", run.optimism_violations},
          {"mean_conf_set_size", run.mean_conf_set_size()},
          {"regret_increment", inc},
          {"cum_regret", run.cum_regret},
          {"member", members},
          {"optimistic_value", opt_val},
          {"conf_set_size", sizes},
          {"qstar_in_set", in_set}};
}

Json to_json(const DimensionResult& r) {
  Json seq = Json::array();
  for (const auto& w : r.witness_sequence) {
    seq.push_back({{"state", w.nu.state},
                   {"action", w.nu.action},
                   {"g", w.witness.g},
                   {"eps_prime", w.witness.eps_prime},
                   {"prefix_energy", w.witness.prefix_energy},
                   {"value", w.witness.nu_value}});
  }
  return {{"value", r.value},          {"method", to_string(r.method)},
          {"rule", to_string(r.rule)}, {"truncated", r.truncated},
          {"nodes", r.nodes},          {"witness_sequence", std::move(seq)}};
}

Json to_json(const StepwiseDimension& r) {
  Json steps = Json::array();
  for (const auto& s : r.per_step) steps.push_back(to_json(s));
  return {{"value", r.value},
          {"truncated", r.truncated},
          {"residual_counts", r.residual_counts},
          {"per_step", std::move(steps)}};
}

Json to_json(const VerifyReport& r) {
  Json diag = Json::object();
  for (const auto& [k, v] : r.diagnostics) diag[k] = finite_or_null(v);
  return {{"suite", r.suite},
          {"trials", r.trials},
          {"violations", r.violations},
          {"skipped", r.skipped},
          {"worst_slack", finite_or_null(r.worst_slack)},
          {"tolerance", r.tolerance},
          {"passed", r.passed},
          {"diagnostics", std::move(diag)}};
}

std::string regret_csv(const RunResult& run) {
  std::ostringstream out;
  out << "episode,regret_increment,cum_regret,conf_set_size,qstar_in_set\n";
  char buf[128];
  for (std::size_t k = 0; k < run.episodes.size(); ++k) {
    const auto& e = run.episodes[k];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%d,%d\n", k + 1, e.regret_increment,
                  run.cum_regret[k], e.conf_set_size, e.qstar_in_set ? 1 : 0);
    out << buf;
  }
  return out.str();
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(ss.str())));
  return buf;
}

}  // namespace swopea
