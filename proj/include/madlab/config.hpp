#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "madlab/games.hpp"
#include "madlab/protocol.hpp"
#include "madlab/scriptvm.hpp"

namespace madlab {

inline constexpr const char* kToolVersion = "0.1.0";

// Bad key or value; line is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& msg, int line) : std::runtime_error(format(msg, line)), line_(line) {}
  int line() const { return line_; }

 private:
  static std::string format(const std::string& msg, int line) {
    return line > 0 ? "config line " + std::to_string(line) + ": " + msg : "config: " + msg;
  }
  int line_;
};

struct AttackSection {
  std::string table = "data/table5.csv";  // resolved against the config's directory
  Rational lambda_min = Rational(1, 100);
  Rational p_myopic = Rational(3, 10);
  std::int64_t t_min = 1;
  std::int64_t t_max = 10;
};

struct ScriptSection {
  std::vector<Builtin> builtins = {Builtin::MhDep, Builtin::MhCol, Builtin::Htlc};
  std::vector<HashMode> hash_modes = {HashMode::Ledger};
  std::int64_t T = 3;
};

struct ScenarioConfig {
  std::optional<GameConfig> game;  // absent for table5/script/modelcheck-only files
  std::uint64_t trials = 1000;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  std::vector<MinerPolicy> policies;
  AStrategy a = AStrategy::Prescribed;
  BStrategy b = BStrategy::Prescribed;
  std::string out;
  std::string format = "json";
  AttackSection attack;
  ModelCheckOptions modelcheck;
  ScriptSection script;

  std::string source_dir;   // directory of the config file
  std::string config_hash;  // SHA-256 of the file bytes, hex
};

ScenarioConfig parse_config(const std::string& text, const std::string& source_dir = ".");
ScenarioConfig load_config(const std::string& path);  // throws ConfigError

// {tool_version, config_hash, seed}
nlohmann::json meta(const ScenarioConfig& cfg);

}  // namespace madlab
