#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "madlab/ledger.hpp"
#include "madlab/rational.hpp"
#include "madlab/types.hpp"

namespace madlab {

enum class GameKind { MadHtlc, Htlc };
std::string to_string(GameKind g);

// Ids double as the miner tie-break order (lower first).
enum class TxKind : std::uint8_t {
  Unrelated = 0,
  TxADep = 1,
  TxBDep = 2,
  TxBCol = 3,
  TxB3 = 4,
  TxMDep = 5,
  TxMCol = 6,
  TxM3 = 7,
  TxAHtlc = 8,
  TxBHtlc = 9,
};
std::string to_string(TxKind k);  // "unrelated", "txA_dep", ...

using TxSet = std::uint16_t;  // bit (1 << kind)
inline bool has(TxSet s, TxKind k) { return s & (1u << static_cast<unsigned>(k)); }
inline TxSet with(TxSet s, TxKind k) { return static_cast<TxSet>(s | (1u << static_cast<unsigned>(k))); }
std::vector<std::string> tx_names(TxSet s);

// Bound violation on one GameConfig field.
class FieldError : public std::invalid_argument {
 public:
  FieldError(std::string field, const std::string& msg) : std::invalid_argument(msg), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct GameConfig {
  GameKind game = GameKind::MadHtlc;
  std::int64_t T = 3;
  TokenAmount v_dep = 0;  // HTLC amount for Htlc
  TokenAmount v_col = 0;
  TokenAmount f = 1;
  TokenAmount f_a_dep = 0;
  TokenAmount f_b_dep = 0;
  TokenAmount f_b_col = 0;
  TokenAmount f_b_3 = 0;
  TokenAmount f_a_htlc = 0;
  TokenAmount f_b_htlc = 0;
  MinerPopulation population;
  bool alice_knows_pre_a = true;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
  std::size_t miners() const { return population.size(); }
};

struct SubgameId {
  std::int64_t k = 1;
  bool red = true;
  TxSet published = 0;

  bool pre_a_revealed() const { return has(published, TxKind::TxADep); }
  bool pre_b_revealed() const { return has(published, TxKind::TxBDep) || has(published, TxKind::TxB3); }
  auto operator<=>(const SubgameId&) const = default;
};

std::string describe(const SubgameId& s);

enum class Actor { Alice, Bob, Miner };

// Miner: kinds the miner may put in the block. Alice/Bob: kinds they may
// still publish (passing is always allowed and not listed).
std::vector<TxKind> enumerate_actions(const SubgameId& s, const GameConfig& cfg, Actor actor);

// Utility vector: [A, B, miner 1..n], followed by the probability that A's
// transaction is confirmed.
struct Utilities {
  std::vector<Rational> v;

  explicit Utilities(std::size_t miners = 0) : v(miners + 3, Rational(0)) {}
  Rational& a() { return v[0]; }
  Rational& b() { return v[1]; }
  Rational& miner(std::size_t i) { return v[2 + i]; }
  Rational& p_a_confirmed() { return v.back(); }
  const Rational& a() const { return v[0]; }
  const Rational& b() const { return v[1]; }
  const Rational& miner(std::size_t i) const { return v[2 + i]; }
  const Rational& p_a_confirmed() const { return v.back(); }
};

// Publication step node: mover 0 = A, 1 = B; passes = consecutive passes so far.
struct PubKey {
  SubgameId s;
  int mover = 0;
  int passes = 0;
  auto operator<=>(const PubKey&) const = default;
};

struct PubNode {
  std::optional<TxKind> action;  // nullopt = pass
  bool tie = false;
  Utilities value;
};

struct MinerNode {
  std::vector<TxKind> action;  // per miner
  std::vector<bool> tie;
  Utilities value;
};

struct SpeSolution {
  GameConfig cfg;
  std::map<PubKey, PubNode> pub;
  std::map<SubgameId, MinerNode> miner;
  Utilities root;
  bool unique = true;          // no miner tie on the equilibrium path
  std::uint64_t ties_on_path = 0;
  std::uint64_t ties_total = 0;
  bool attack_spe = false;     // A knows pre_a yet her transaction is never confirmed

  const PubNode& at(const SubgameId& s, int mover = 0, int passes = 0) const;
  const MinerNode& miners_at(const SubgameId& s) const;
  // Value at the start of round s.k (before any publication in it).
  const Utilities& value(const SubgameId& s) const { return at(s).value; }
};

SpeSolution solve_spe(const GameConfig& cfg);

// The prescribed publication move for A (mover 0) or B (mover 1).
std::optional<TxKind> prescribed_move(const SubgameId& s, const GameConfig& cfg, int mover);

// Miner i's utility from the lemmas on G^H subgames with both HTLC
// transactions published (state irred, or red with f_B above the threshold).
struct ClosedForm {
  bool applicable = false;
  std::string lemma;
  Rational value;
};
ClosedForm closed_form_utility(GameKind g, std::size_t miner, std::int64_t k, bool red, const GameConfig& cfg);

// Deviation evaluation ------------------------------------------------------

struct Move {
  enum class Kind { Spe, Pass, Publish };
  Kind kind = Kind::Spe;
  TxKind tx = TxKind::Unrelated;
  static Move spe() { return {}; }
  static Move pass() { return {Kind::Pass, TxKind::Unrelated}; }
  static Move publish(TxKind t) { return {Kind::Publish, t}; }
};
using PartyStrategy = std::function<Move(const SubgameId&)>;

// Utilities from the initial game when A and B follow the given strategies
// (Move::spe() defers to the solution) and miners play the solution.
Utilities evaluate_profile(const SpeSolution& sol, const PartyStrategy& a, const PartyStrategy& b);
PartyStrategy prescribed_strategy(const GameConfig& cfg, int mover);

struct DeviationResult {
  std::string who;
  std::string name;
  Rational deviation;
  Rational prescribed;
  bool strict = false;  // strict inequality required
  bool ok = true;
};

struct MinerCheck {
  std::string state;
  std::size_t miner = 0;
  std::string expected;
  std::string actual;
  bool unique = true;
  bool ok = true;
};

struct DeviationReport {
  std::vector<DeviationResult> deviations;
  std::vector<MinerCheck> last_round;
  Utilities prescribed;
  Utilities spe;
  bool spe_matches_prescribed = true;
  bool ok = true;
  nlohmann::json to_json() const;
};

DeviationReport verify_mad(const GameConfig& cfg);

// Monte Carlo --------------------------------------------------------------

enum class MinerPolicy { NonMyopicSpe, Myopic };
enum class AStrategy { Prescribed, Spe, Withhold };
enum class BStrategy { Prescribed, Spe, Bribe };
MinerPolicy parse_miner_policy(const std::string& s);
AStrategy parse_a_strategy(const std::string& s);
BStrategy parse_b_strategy(const std::string& s);
std::string to_string(MinerPolicy p);
std::string to_string(AStrategy s);
std::string to_string(BStrategy s);

struct SimReport {
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  std::uint64_t a_confirmed = 0;
  std::uint64_t attack_success = 0;  // B's claim on the deposit confirmed, A's not
  std::vector<double> mean;          // [A, B, miner 1..n]
  std::vector<double> ci95;          // half-widths
  double success_rate() const { return trials ? static_cast<double>(attack_success) / trials : 0; }
  double a_confirmed_rate() const { return trials ? static_cast<double>(a_confirmed) / trials : 0; }
  nlohmann::json to_json() const;
};

struct SimOptions {
  std::vector<MinerPolicy> policies;  // per miner; empty = all NonMyopicSpe
  AStrategy a = AStrategy::Prescribed;
  BStrategy b = BStrategy::Prescribed;
  std::uint64_t trials = 1000;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  // Called with each trial's ledger trace when set (trial 0 only).
  std::function<void(const std::vector<RoundOutcome>&)> trace_sink;
};

SimReport simulate(const GameConfig& cfg, const SimOptions& opt);

// Output -----------------------------------------------------------------

nlohmann::json to_json(const Utilities& u);
nlohmann::json to_json(const SpeSolution& sol);
// Rows: k,state,actor,action,utility
std::string to_csv(const SpeSolution& sol);

// Threshold of the bribery attack on HTLC, (f_A - f)/lambda_min + f.
Rational htlc_threshold(const GameConfig& cfg);

struct SweepPoint {
  TokenAmount value = 0;
  Utilities utilities;
  bool attack_spe = false;
};
// Re-solves with one fee field ("f_b_htlc", "f_a_htlc", "f_a_dep", ...) set to each value.
std::vector<SweepPoint> sweep_fee(const GameConfig& cfg, const std::string& field, const std::vector<TokenAmount>& values);

}  // namespace madlab
