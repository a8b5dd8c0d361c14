#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "madlab/types.hpp"

namespace madlab {

enum class ActionKind : std::uint8_t { SetupB, SetupA, Share, Publish, Init, Redeem };

struct Action {
  ActionKind kind = ActionKind::SetupB;
  PartyId party;          // Publish, Redeem
  std::uint8_t path = 0;  // Redeem: index into mad_paths()

  bool operator==(const Action&) const = default;
};

using ActionScript = std::vector<Action>;

std::string to_string(const Action& a);  // "setup-B", "publish(A)", "redeem(M,dep-M)"
Action parse_action(std::string_view s);  // throws std::invalid_argument
// setup-B, setup-A, share, publish(A|B), init, redeem(A|B|M x 5 paths): 21 actions.
const std::vector<Action>& action_alphabet();

enum class Phase : std::uint8_t { Setup, Initiation, Redeeming };
std::string to_string(Phase p);

struct RoleState {
  Phase phase = Phase::Setup;
  bool has_pre_a = false;
  bool has_pre_b = false;
  bool has_digests = false;
  bool has_init_tx = false;
  bool shared = false;  // B sent pre_a to A (A accepted it)
};

struct FrmhState {
  bool setup_a = false, setup_b = false, shared = false, published = false, init = false, w1 = false, w2 = false;
};

struct TraceOutcome {
  std::vector<std::optional<bool>> redeem_results;  // one per redeem action; nullopt = ignored
  bool w1 = false, w2 = false, shared = false;
  std::map<std::string, RoleState> roles;  // run_protocol only: "A", "B", "M"
  FrmhState frmh;                          // run_frmh only
  std::vector<std::string> mempool;        // published transactions
  std::vector<std::string> revealed;       // "pre_a", "pre_b"
  std::uint64_t ledger_mismatches = 0;     // concrete contract evaluation vs relaxed result
};

enum class Fault { None, SkipW2Update };

// The two-party protocol with the mempool functionality, over concrete
// preimages drawn from `seed`. Out-of-phase messages are ignored.
TraceOutcome run_protocol(const ActionScript& script, bool with_share = true, std::uint64_t seed = 1);
TraceOutcome run_frmh(const ActionScript& script, Fault fault = Fault::None);

struct ModelCheckOptions {
  int max_len = 6;
  Fault fault = Fault::None;
  std::size_t max_examples = 50;
  std::uint64_t seed = 1;
};

struct ModelCheckReport {
  std::uint64_t scripts_checked = 0;
  std::uint64_t discrepant_scripts = 0;
  std::uint64_t ledger_mismatches = 0;
  std::map<std::string, std::uint64_t> discrepancy_classes;  // minimal counterexamples per class
  std::map<std::string, std::uint64_t> violation_counts;     // "<model>:<bullet>"
  std::uint64_t flag_occurrences = 0;
  nlohmann::json discrepancies = nlohmann::json::array();
  nlohmann::json lemma1_violations = nlohmann::json::array();
  nlohmann::json flags = nlohmann::json::array();
  std::uint64_t minimal_discrepancies = 0;

  nlohmann::json to_json() const;
};

ModelCheckReport model_check_lemma1(const ModelCheckOptions& opt);

}  // namespace madlab
