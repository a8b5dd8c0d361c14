#include "madlab/config.hpp"

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace madlab {

namespace {

int line_of(const YAML::Node& n) { return n.Mark().is_null() ? 0 : n.Mark().line + 1; }

[[noreturn]] void fail(const YAML::Node& n, const std::string& msg) { throw ConfigError(msg, line_of(n)); }

// Key -> (key node, value node), rejecting keys outside `allowed`.
using Entries = std::map<std::string, std::pair<YAML::Node, YAML::Node>>;

Entries entries(const YAML::Node& map, const std::string& where, const std::set<std::string>& allowed) {
  if (!map.IsMap()) fail(map, where + " must be a mapping");
  Entries out;
  for (auto it = map.begin(); it != map.end(); ++it) {
    std::string key = it->first.as<std::string>();
    if (!allowed.count(key)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail(it->first, "unknown key '" + key + "' in " + where + " (allowed: " + list + ")");
    }
    if (out.count(key)) fail(it->first, "duplicate key '" + key + "' in " + where);
    out.emplace(key, std::make_pair(it->first, it->second));
  }
  return out;
}

std::string scalar(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) fail(n, "'" + key + "' must be a scalar");
  return n.Scalar();
}

std::int64_t as_int(const YAML::Node& n, const std::string& key) {
  std::string s = scalar(n, key);
  try {
    std::size_t pos = 0;
    long long v = std::stoll(s, &pos, 10);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(n, "'" + key + "' must be an integer, got '" + s + "'");
  }
}

std::uint64_t as_uint(const YAML::Node& n, const std::string& key) {
  std::int64_t v = as_int(n, key);
  if (v < 0) fail(n, "'" + key + "' must not be negative");
  return static_cast<std::uint64_t>(v);
}

Rational as_rational(const YAML::Node& n, const std::string& key) {
  std::string s = scalar(n, key);
  try {
    return parse_rational(s);
  } catch (const std::exception&) {
    fail(n, "'" + key + "' must be a number or fraction, got '" + s + "'");
  }
}

bool as_bool(const YAML::Node& n, const std::string& key) {
  std::string s = scalar(n, key);
  if (s == "true") return true;
  if (s == "false") return false;
  fail(n, "'" + key + "' must be true or false, got '" + s + "'");
}

template <typename F>
auto convert(const YAML::Node& n, const std::string& key, F&& f) -> decltype(f(std::string())) {
  std::string s = scalar(n, key);
  try {
    return f(s);
  } catch (const std::invalid_argument& e) {
    fail(n, "'" + key + "': " + e.what());
  }
}

std::vector<YAML::Node> seq(const YAML::Node& n, const std::string& key) {
  if (!n.IsSequence()) fail(n, "'" + key + "' must be a list");
  std::vector<YAML::Node> out;
  for (const auto& x : n) out.push_back(x);
  return out;
}

const std::vector<std::string> kFeeFields = {"f", "v_dep", "v_col", "f_a_dep", "f_b_dep", "f_b_col", "f_b_3", "f_a_htlc", "f_b_htlc"};

TokenAmount* fee_slot(GameConfig& g, const std::string& k) {
  if (k == "f") return &g.f;
  if (k == "v_dep") return &g.v_dep;
  if (k == "v_col") return &g.v_col;
  if (k == "f_a_dep") return &g.f_a_dep;
  if (k == "f_b_dep") return &g.f_b_dep;
  if (k == "f_b_col") return &g.f_b_col;
  if (k == "f_b_3") return &g.f_b_3;
  if (k == "f_a_htlc") return &g.f_a_htlc;
  if (k == "f_b_htlc") return &g.f_b_htlc;
  return nullptr;
}

}  // namespace

ScenarioConfig parse_config(const std::string& text, const std::string& source_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(e.msg, e.mark.is_null() ? 0 : e.mark.line + 1);
  }
  ScenarioConfig cfg;
  cfg.source_dir = source_dir;
  if (!root || root.IsNull()) return cfg;

  auto top = entries(root, "the top level",
                     {"game", "fees", "population", "timeout", "trials", "seed", "jobs", "policies", "output", "attack",
                      "modelcheck", "script"});

  std::map<std::string, YAML::Node> field_node;  // GameConfig field -> node for error lines
  if (top.count("game")) {
    GameConfig g;
    g.f = 0;
    auto [gk, gv] = top.at("game");
    field_node["game"] = gk;
    auto ge = entries(gv, "game", {"kind", "alice_knows_pre_a"});
    if (!ge.count("kind")) fail(gk, "game needs 'kind' (mad-htlc or htlc)");
    std::string kind = scalar(ge.at("kind").second, "kind");
    if (kind == "mad-htlc") g.game = GameKind::MadHtlc;
    else if (kind == "htlc") g.game = GameKind::Htlc;
    else fail(ge.at("kind").second, "game kind must be mad-htlc or htlc, got '" + kind + "'");
    if (ge.count("alice_knows_pre_a")) g.alice_knows_pre_a = as_bool(ge.at("alice_knows_pre_a").second, "alice_knows_pre_a");

    if (!top.count("fees")) fail(gk, "a game needs a 'fees' section");
    auto [fk, fv] = top.at("fees");
    auto fe = entries(fv, "fees", std::set<std::string>(kFeeFields.begin(), kFeeFields.end()));
    for (const auto& name : kFeeFields) {
      field_node[name] = fk;
      if (!fe.count(name)) continue;
      *fee_slot(g, name) = as_int(fe.at(name).second, name);
      field_node[name] = fe.at(name).first;
    }

    if (!top.count("population")) fail(gk, "a game needs a 'population' list of mining powers");
    auto [pk, pv] = top.at("population");
    field_node["population"] = pk;
    for (const auto& x : seq(pv, "population")) g.population.powers.push_back(as_rational(x, "population"));

    if (!top.count("timeout")) fail(gk, "a game needs a 'timeout'");
    g.T = as_int(top.at("timeout").second, "timeout");
    field_node["T"] = top.at("timeout").first;

    try {
      g.validate();
    } catch (const FieldError& e) {
      auto it = field_node.find(e.field());
      std::string key = e.field() == "T" ? "timeout" : e.field();
      throw ConfigError("'" + key + "': " + e.what(), it == field_node.end() ? 0 : line_of(it->second));
    }
    cfg.game = g;
  } else {
    for (const char* k : {"fees", "population", "timeout"})
      if (top.count(k)) fail(top.at(k).first, std::string("'") + k + "' needs a 'game' section");
  }

  if (top.count("trials")) {
    cfg.trials = as_uint(top.at("trials").second, "trials");
    if (cfg.trials == 0) fail(top.at("trials").second, "'trials' must be at least 1");
  }
  if (top.count("seed")) cfg.seed = as_uint(top.at("seed").second, "seed");
  if (top.count("jobs")) {
    cfg.jobs = static_cast<unsigned>(as_uint(top.at("jobs").second, "jobs"));
    if (cfg.jobs == 0) fail(top.at("jobs").second, "'jobs' must be at least 1");
  }

  if (top.count("policies")) {
    auto [pk, pv] = top.at("policies");
    auto pe = entries(pv, "policies", {"miners", "a", "b"});
    if (pe.count("miners")) {
      for (const auto& x : seq(pe.at("miners").second, "miners"))
        cfg.policies.push_back(convert(x, "miners", parse_miner_policy));
      if (cfg.game && cfg.policies.size() != cfg.game->miners())
        fail(pe.at("miners").second, "'miners' lists " + std::to_string(cfg.policies.size()) +
                                         " policies but the population has " + std::to_string(cfg.game->miners()) +
                                         " miners");
    }
    if (pe.count("a")) cfg.a = convert(pe.at("a").second, "a", parse_a_strategy);
    if (pe.count("b")) cfg.b = convert(pe.at("b").second, "b", parse_b_strategy);
  }

  if (top.count("output")) {
    auto oe = entries(top.at("output").second, "output", {"path", "format"});
    if (oe.count("path")) cfg.out = scalar(oe.at("path").second, "path");
    if (oe.count("format")) {
      cfg.format = scalar(oe.at("format").second, "format");
      if (cfg.format != "json" && cfg.format != "csv") fail(oe.at("format").second, "'format' must be json or csv");
    }
  }

  if (top.count("attack")) {
    auto ae = entries(top.at("attack").second, "attack", {"table", "lambda_min", "p_myopic", "t_min", "t_max"});
    if (ae.count("table")) cfg.attack.table = scalar(ae.at("table").second, "table");
    if (ae.count("lambda_min")) {
      cfg.attack.lambda_min = as_rational(ae.at("lambda_min").second, "lambda_min");
      if (!(cfg.attack.lambda_min > 0 && cfg.attack.lambda_min <= 1))
        fail(ae.at("lambda_min").second, "'lambda_min' must be in (0, 1]");
    }
    if (ae.count("p_myopic")) {
      cfg.attack.p_myopic = as_rational(ae.at("p_myopic").second, "p_myopic");
      if (cfg.attack.p_myopic < 0 || cfg.attack.p_myopic > 1) fail(ae.at("p_myopic").second, "'p_myopic' must be in [0, 1]");
    }
    if (ae.count("t_min")) cfg.attack.t_min = as_int(ae.at("t_min").second, "t_min");
    if (ae.count("t_max")) cfg.attack.t_max = as_int(ae.at("t_max").second, "t_max");
    if (cfg.attack.t_min < 1 || cfg.attack.t_max < cfg.attack.t_min)
      fail(top.at("attack").first, "attack timeout range must satisfy 1 <= t_min <= t_max");
  }

  if (top.count("modelcheck")) {
    auto me = entries(top.at("modelcheck").second, "modelcheck", {"max_len", "fault", "max_examples"});
    if (me.count("max_len")) {
      cfg.modelcheck.max_len = static_cast<int>(as_int(me.at("max_len").second, "max_len"));
      if (cfg.modelcheck.max_len < 1 || cfg.modelcheck.max_len > 8)
        fail(me.at("max_len").second, "'max_len' must be between 1 and 8");
    }
    if (me.count("fault")) {
      std::string f = scalar(me.at("fault").second, "fault");
      if (f == "none") cfg.modelcheck.fault = Fault::None;
      else if (f == "skip-w2-update") cfg.modelcheck.fault = Fault::SkipW2Update;
      else fail(me.at("fault").second, "'fault' must be none or skip-w2-update");
    }
    if (me.count("max_examples")) cfg.modelcheck.max_examples = as_uint(me.at("max_examples").second, "max_examples");
  }

  if (top.count("script")) {
    auto se = entries(top.at("script").second, "script", {"builtins", "hash", "timeout"});
    if (se.count("builtins")) {
      cfg.script.builtins.clear();
      for (const auto& x : seq(se.at("builtins").second, "builtins"))
        cfg.script.builtins.push_back(convert(x, "builtins", [](const std::string& s) { return parse_builtin(s); }));
    }
    if (se.count("hash")) {
      cfg.script.hash_modes.clear();
      for (const auto& x : seq(se.at("hash").second, "hash")) {
        std::string h = scalar(x, "hash");
        if (h == "ledger") cfg.script.hash_modes.push_back(HashMode::Ledger);
        else if (h == "bitcoin160") cfg.script.hash_modes.push_back(HashMode::Bitcoin160);
        else fail(x, "'hash' entries must be ledger or bitcoin160");
      }
    }
    if (se.count("timeout")) {
      cfg.script.T = as_int(se.at("timeout").second, "timeout");
      if (cfg.script.T < 1) fail(se.at("timeout").second, "script 'timeout' must be at least 1");
    }
  }
  cfg.modelcheck.seed = cfg.seed;
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path, 0);
  std::stringstream ss;
  ss << f.rdbuf();
  std::string text = ss.str();
  std::string dir = std::filesystem::path(path).parent_path().string();
  ScenarioConfig cfg = parse_config(text, dir.empty() ? "." : dir);
  cfg.config_hash = to_hex(sha256(Bytes(text.begin(), text.end())));
  return cfg;
}

nlohmann::json meta(const ScenarioConfig& cfg) {
  return {{"tool_version", kToolVersion}, {"config_hash", cfg.config_hash}, {"seed", cfg.seed}};
}

}  // namespace madlab
