#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "madlab/attack.hpp"
#include "madlab/config.hpp"
#include "madlab/games.hpp"
#include "madlab/protocol.hpp"
#include "madlab/scriptvm.hpp"

using namespace madlab;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kViolation = 3;

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> trials;
  std::optional<unsigned> jobs;
  std::optional<int> max_len;
  std::string format;
};

struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ScenarioConfig load(const Flags& fl, bool need_game) {
  ScenarioConfig cfg;
  if (!fl.config.empty()) {
    cfg = load_config(fl.config);
  } else {
    if (need_game) throw Usage("--config is required for this subcommand");
    cfg.config_hash = to_hex(sha256(Bytes{}));
  }
  if (need_game && !cfg.game) throw ConfigError("this subcommand needs a 'game' section", 0);
  if (fl.seed) cfg.seed = *fl.seed;
  if (fl.trials) {
    if (*fl.trials == 0) throw Usage("--trials must be at least 1");
    cfg.trials = *fl.trials;
  }
  if (fl.jobs) cfg.jobs = std::max(1u, *fl.jobs);
  if (fl.max_len) {
    if (*fl.max_len < 1 || *fl.max_len > 8) throw Usage("--max-len must be between 1 and 8");
    cfg.modelcheck.max_len = *fl.max_len;
  }
  if (!fl.format.empty()) cfg.format = fl.format;
  if (!fl.out.empty()) cfg.out = fl.out;
  cfg.modelcheck.seed = cfg.seed;
  return cfg;
}

std::string csv_meta(const ScenarioConfig& cfg) {
  return "# tool_version=" + std::string(kToolVersion) + " config_hash=" + cfg.config_hash +
         " seed=" + std::to_string(cfg.seed) + "\n";
}

void emit(const ScenarioConfig& cfg, const std::string& payload) {
  if (cfg.out.empty()) {
    std::cout << payload;
    return;
  }
  std::ofstream f(cfg.out, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + cfg.out);
  f << payload;
  std::cerr << "wrote " << cfg.out << "\n";
}

std::string dump(json j) { return j.dump(2) + "\n"; }

int cmd_solve(const Flags& fl) {
  ScenarioConfig cfg = load(fl, true);
  SpeSolution sol = solve_spe(*cfg.game);
  if (cfg.format == "csv") {
    emit(cfg, csv_meta(cfg) + to_csv(sol));
  } else {
    json j = to_json(sol);
    j["meta"] = meta(cfg);
    emit(cfg, dump(j));
  }
  return kOk;
}

int cmd_simulate(const Flags& fl) {
  ScenarioConfig cfg = load(fl, true);
  SimOptions opt;
  opt.policies = cfg.policies;
  opt.a = cfg.a;
  opt.b = cfg.b;
  opt.trials = cfg.trials;
  opt.seed = cfg.seed;
  opt.jobs = cfg.jobs;
  json trace = json::array();
  opt.trace_sink = [&](const std::vector<RoundOutcome>& rounds) {
    for (const auto& r : rounds) trace.push_back(trace_record(r));
  };
  SimReport rep = simulate(*cfg.game, opt);
  if (cfg.format == "csv") {
    std::ostringstream os;
    os << csv_meta(cfg) << "metric,value,ci95\n";
    os << "attack_success_rate," << rep.success_rate() << ",\n";
    os << "a_confirmed_rate," << rep.a_confirmed_rate() << ",\n";
    os << "u_A," << rep.mean[0] << "," << rep.ci95[0] << "\n";
    os << "u_B," << rep.mean[1] << "," << rep.ci95[1] << "\n";
    for (std::size_t i = 2; i < rep.mean.size(); ++i)
      os << "u_M" << i - 1 << "," << rep.mean[i] << "," << rep.ci95[i] << "\n";
    emit(cfg, os.str());
  } else {
    json j = rep.to_json();
    j["meta"] = meta(cfg);
    j["game"] = to_string(cfg.game->game);
    json pol = json::array();
    for (std::size_t i = 0; i < cfg.game->miners(); ++i)
      pol.push_back(to_string(cfg.policies.empty() ? MinerPolicy::NonMyopicSpe : cfg.policies[i]));
    j["policies"] = {{"miners", pol}, {"a", to_string(cfg.a)}, {"b", to_string(cfg.b)}};
    j["trace_trial0"] = trace;
    emit(cfg, dump(j));
  }
  return kOk;
}

int cmd_verify(const Flags& fl) {
  ScenarioConfig cfg = load(fl, true);
  if (cfg.game->game != GameKind::MadHtlc) throw ConfigError("verify needs game kind mad-htlc", 0);
  DeviationReport rep = verify_mad(*cfg.game);
  if (cfg.format == "csv") {
    std::ostringstream os;
    os << csv_meta(cfg) << "who,deviation,utility,prescribed,strict,ok\n";
    for (const auto& d : rep.deviations)
      os << d.who << "," << d.name << "," << to_string(d.deviation) << "," << to_string(d.prescribed) << ","
         << (d.strict ? "true" : "false") << "," << (d.ok ? "true" : "false") << "\n";
    emit(cfg, os.str());
  } else {
    json j = rep.to_json();
    j["meta"] = meta(cfg);
    emit(cfg, dump(j));
  }
  if (!rep.ok) std::cerr << "profitable deviation or equilibrium mismatch found\n";
  return rep.ok ? kOk : kViolation;
}

int cmd_table5(const Flags& fl) {
  ScenarioConfig cfg = load(fl, false);
  std::string path = cfg.attack.table;
  if (!std::filesystem::path(path).is_absolute() && !fl.config.empty())
    path = (std::filesystem::path(cfg.source_dir) / path).string();
  Table5Input in;
  try {
    in = load_table5(path);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("attack table: ") + e.what(), 0);
  }
  for (auto& r : in.rows) r.lambda_min = cfg.attack.lambda_min;
  ResistanceTable t = table5(in.rows, in.published);
  std::cerr << t.to_text();
  if (cfg.format == "csv") {
    emit(cfg, csv_meta(cfg) + t.to_csv());
    return kOk;
  }
  json j;
  j["meta"] = meta(cfg);
  j["lambda_min"] = to_string(cfg.attack.lambda_min);
  json rows = json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"label", r.label},
                    {"v", to_string(r.v)},
                    {"f", to_string(r.f)},
                    {"safe_fee", to_string(r.safe_fee)},
                    {"ratio", to_decimal(r.ratio, 4)},
                    {"published_ratio", r.published ? json(to_decimal(*r.published, 4)) : json(nullptr)},
                    {"match", r.match}});
  j["rows"] = rows;
  j["mismatches"] = t.mismatches();
  if (cfg.game && cfg.game->game == GameKind::Htlc) {
    const GameConfig& g = *cfg.game;
    BribeScenario s{"config", Rational(g.v_dep), Rational(g.f), Rational(g.f_a_htlc), g.population.lambda_min()};
    Threshold th = bribe_threshold(s);
    j["bribe_threshold"] = {{"value", to_string(th.value)}, {"feasible", th.feasible}};
    j["safe_fee"] = to_string(safe_fee(s.v, s.f, s.lambda_min));
    json curve = json::array();
    for (const auto& c : myopic_cost_curve(s, cfg.attack.p_myopic, cfg.attack.t_min, cfg.attack.t_max))
      curve.push_back({{"T", c.T},
                       {"success", to_string(c.success)},
                       {"required_bribe", c.required_bribe ? json(to_string(*c.required_bribe)) : json(nullptr)}});
    j["myopic_cost_curve"] = {{"p_myopic", to_string(cfg.attack.p_myopic)}, {"model_extension", true}, {"points", curve}};
  }
  emit(cfg, dump(j));
  return kOk;
}

std::string hash_name(HashMode m) { return m == HashMode::Ledger ? "ledger" : "bitcoin160"; }

int cmd_script(const Flags& fl) {
  ScenarioConfig cfg = load(fl, false);
  if (!fl.trials && fl.config.empty()) cfg.trials = 10000;
  json runs = json::array();
  std::uint64_t total = 0;
  std::uint64_t stream = 0;
  std::ostringstream csv;
  csv << csv_meta(cfg) << "builtin,hash,trials,vm_true,counterexamples\n";
  for (HashMode hm : cfg.script.hash_modes)
    for (Builtin b : cfg.script.builtins) {
      std::mt19937_64 rng(derive_seed(cfg.seed, stream++));
      DifferentialOptions opt;
      opt.T = cfg.script.T;
      opt.hash_mode = hm;
      DifferentialReport r = differential_check(b, cfg.trials, rng, opt);
      total += r.counterexample_count;
      json ces = json::array();
      for (const auto& c : r.counterexamples)
        ces.push_back({{"path", path_name(b, c.path)},
                       {"signer", c.signer},
                       {"slot_a", c.slot_a},
                       {"slot_b", c.slot_b},
                       {"height_offset", c.height_offset},
                       {"extra_item", c.extra_item},
                       {"vm", c.vm},
                       {"oracle", c.oracle},
                       {"vm_reason", c.vm_reason}});
      runs.push_back({{"builtin", to_string(b)},
                      {"hash", hash_name(hm)},
                      {"trials", r.trials},
                      {"vm_true", r.vm_true},
                      {"counterexample_count", r.counterexample_count},
                      {"counterexamples", ces}});
      csv << to_string(b) << "," << hash_name(hm) << "," << r.trials << "," << r.vm_true << ","
          << r.counterexample_count << "\n";
    }
  if (cfg.format == "csv") {
    emit(cfg, csv.str());
  } else {
    json j;
    j["meta"] = meta(cfg);
    j["runs"] = runs;
    j["counterexamples"] = total;
    emit(cfg, dump(j));
  }
  return total == 0 ? kOk : kViolation;
}

int cmd_modelcheck(const Flags& fl) {
  ScenarioConfig cfg = load(fl, false);
  ModelCheckReport rep = model_check_lemma1(cfg.modelcheck);
  json j = rep.to_json();
  j["meta"] = meta(cfg);
  j["max_len"] = cfg.modelcheck.max_len;
  j["fault"] = cfg.modelcheck.fault == Fault::None ? "none" : "skip-w2-update";
  std::uint64_t violations = 0;
  for (const auto& [k, n] : rep.violation_counts) violations += n;
  if (cfg.format == "csv") {
    std::ostringstream os;
    os << csv_meta(cfg) << "kind,name,count\n";
    os << "total,scripts_checked," << rep.scripts_checked << "\n";
    os << "total,discrepant_scripts," << rep.discrepant_scripts << "\n";
    for (const auto& [k, n] : rep.discrepancy_classes) os << "discrepancy," << k << "," << n << "\n";
    for (const auto& [k, n] : rep.violation_counts) os << "violation," << k << "," << n << "\n";
    os << "flag,occurrences," << rep.flag_occurrences << "\n";
    emit(cfg, os.str());
  } else {
    emit(cfg, dump(j));
  }
  bool ok = rep.discrepant_scripts == 0 && violations == 0 && rep.ledger_mismatches == 0;
  if (!ok)
    std::cerr << "model check: " << rep.discrepant_scripts << " discrepant scripts, " << violations
              << " property violations\n";
  return ok ? kOk : kViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"madlab: HTLC / MAD-HTLC incentive laboratory"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  Flags fl;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config,-c", fl.config, "scenario YAML file");
    if (config_required) c->required();
    c->check(CLI::ExistingFile);
    sub->add_option("--out,-o", fl.out, "output file (default stdout)");
    sub->add_option("--seed", fl.seed, "override the config seed");
    sub->add_option("--format", fl.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  };

  auto* solve = app.add_subcommand("solve", "backward-induction equilibrium of the configured game");
  add_common(solve, true);
  auto* sim = app.add_subcommand("simulate", "Monte Carlo over the ledger with the configured miner mix");
  add_common(sim, true);
  sim->add_option("--trials", fl.trials, "override trials");
  sim->add_option("--jobs", fl.jobs, "worker threads");
  auto* verify = app.add_subcommand("verify", "check MAD-HTLC deviations against the prescribed strategies");
  add_common(verify, true);
  auto* t5 = app.add_subcommand("table5", "HTLC bribe resistance ratios");
  add_common(t5, false);
  auto* script = app.add_subcommand("script", "differential test of the script VM against the predicates");
  add_common(script, false);
  script->add_option("--trials", fl.trials, "trials per script");
  auto* mc = app.add_subcommand("modelcheck", "exhaustive protocol vs functionality check");
  add_common(mc, false);
  mc->add_option("--max-len", fl.max_len, "maximum script length");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    if (*solve) return cmd_solve(fl);
    if (*sim) return cmd_simulate(fl);
    if (*verify) return cmd_verify(fl);
    if (*t5) return cmd_table5(fl);
    if (*script) return cmd_script(fl);
    if (*mc) return cmd_modelcheck(fl);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Usage& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const FieldError& e) {
    std::cerr << "error: '" << e.field() << "': " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kViolation;
  }
  return kConfigError;
}
