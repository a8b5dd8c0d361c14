#include "madlab/protocol.hpp"

#include <array>
#include <random>
#include <stdexcept>

#include "madlab/contracts.hpp"

namespace madlab {

namespace {

enum : std::uint8_t { kPathDepA, kPathDepB, kPathDepM, kPathColB, kPathColM };

int party_index(PartyId p) { return p.is_alice() ? 0 : p.is_bob() ? 1 : 2; }

const char* kPartyNames[] = {"A", "B", "M"};

bool reveals_a(std::uint8_t path) { return path == kPathDepA || path == kPathDepM || path == kPathColM; }
bool reveals_b(std::uint8_t path) { return path == kPathDepB || path == kPathDepM || path == kPathColM; }
bool merged(std::uint8_t path) { return path == kPathDepM || path == kPathColM; }

// rPredicate tabulated once: [path][party][w1][w2]
struct RTable {
  std::array<std::array<std::array<std::array<bool, 2>, 2>, 3>, 5> v{};
  RTable() {
    const PartyId parties[] = {PartyId::alice(), PartyId::bob(), PartyId::miner(1)};
    for (int p = 0; p < 5; ++p)
      for (int q = 0; q < 3; ++q)
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) v[p][q][a][b] = r_predicate(mad_paths()[p], parties[q], a, b);
  }
  bool operator()(std::uint8_t path, int party, bool w1, bool w2) const { return v[path][party][w1][w2]; }
};

const RTable& rtable() {
  static const RTable t;
  return t;
}

// Concrete preimages and contracts for one protocol instance. Hash results
// and contract evaluations are memoized; every input is fixed per instance.
class Crypto {
 public:
  explicit Crypto(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    pre_a_ = random_preimage(rng);
    pre_b_ = random_preimage(rng);
    while (pre_b_ == pre_a_) pre_b_ = random_preimage(rng);
    dig_a_ = hash(pre_a_);
    dig_b_ = hash(pre_b_);
    dep_ = make_mh_dep(PartyId::alice(), PartyId::bob(), kT, dig_a_, dig_b_);
    col_ = make_mh_col(PartyId::bob(), kT, dig_a_, dig_b_);
    a_ok_ = hash(pre_a_) == dig_a_;
    b_ok_ = hash(pre_b_) == dig_b_;
    concrete_.fill(-1);
  }

  // H(pre_a) = dig_a and H(pre_b) = dig_b, as checked by A and the mempool.
  bool a_matches() const { return a_ok_; }
  bool b_matches() const { return b_ok_; }

  // Full contract evaluation of `path` by `party` knowing the given
  // preimages, at a height past the timeout.
  bool concrete(std::uint8_t path, int party, bool ka, bool kb) {
    int key = ((path * 3 + party) * 2 + ka) * 2 + kb;
    if (concrete_[key] < 0) {
      const PartyId parties[] = {PartyId::alice(), PartyId::bob(), PartyId::miner(1)};
      RedeemWitness w;
      w.path = mad_paths()[path];
      if (ka) w.pre1 = pre_a_;
      if (kb) w.pre2 = pre_b_;
      w.signer = parties[party];
      const PredicateAst& ast = path <= kPathDepM ? dep_ : col_;
      concrete_[key] = evaluate(ast, w, std::int64_t{1}, 1 + kT) ? 1 : 0;
    }
    return concrete_[key] == 1;
  }

 private:
  static constexpr std::int64_t kT = 2;
  Preimage pre_a_, pre_b_;
  Digest dig_a_, dig_b_;
  PredicateAst dep_, col_;
  bool a_ok_ = false, b_ok_ = false;
  std::array<std::int8_t, 60> concrete_{};
};

struct PiState {
  Phase phase[3] = {Phase::Setup, Phase::Setup, Phase::Initiation};
  bool a_digests = false;
  bool a_pre_a = false;  // accepted from B
  bool b_secrets = false;
  bool m_received = false;
  bool init_tx[3] = {false, false, false};
  // mempool functionality
  bool g_tx = false, g_published = false, g_init = false, w1 = false, w2 = false;
};

struct StepOut {
  bool processed = false;
  std::optional<bool> res;  // redeem only
  bool ledger_mismatch = false;
};

StepOut step_pi(PiState& s, const Action& act, bool with_share, Crypto& cr) {
  StepOut out;
  switch (act.kind) {
    case ActionKind::SetupB:
      if (s.phase[1] == Phase::Setup && !s.b_secrets) {
        s.b_secrets = true;  // draws pre_a, pre_b; digests go to A and the mempool
        s.a_digests = true;
        out.processed = true;
      }
      break;
    case ActionKind::SetupA:
      if (s.phase[0] == Phase::Setup && s.a_digests && !s.g_tx) {
        s.g_tx = true;
        s.phase[0] = Phase::Initiation;
        s.phase[1] = Phase::Initiation;
        out.processed = true;
      }
      break;
    case ActionKind::Share:
      if (with_share && s.phase[1] == Phase::Initiation) {
        // A ignores values that do not hash to dig_a
        if (s.phase[0] == Phase::Initiation && cr.a_matches()) s.a_pre_a = true;
        out.processed = true;
      }
      break;
    case ActionKind::Publish: {
      int p = party_index(act.party);
      if (p < 2 && s.phase[p] == Phase::Initiation && s.g_tx && !s.g_published) {
        s.g_published = true;
        s.m_received = true;
        out.processed = true;
      }
      break;
    }
    case ActionKind::Init:
      if (s.phase[2] == Phase::Initiation && s.m_received && !s.g_init) {
        s.g_init = true;
        for (int p = 0; p < 3; ++p) {
          if (s.phase[p] == Phase::Initiation) {
            s.phase[p] = Phase::Redeeming;
            s.init_tx[p] = true;
          }
        }
        out.processed = true;
      }
      break;
    case ActionKind::Redeem: {
      int p = party_index(act.party);
      if (s.phase[p] != Phase::Redeeming) break;
      bool knows_a = p == 0 ? s.a_pre_a : p == 1 ? s.b_secrets : false;
      bool knows_b = p == 1 && s.b_secrets;
      bool ka = knows_a || s.w1;
      bool kb = knows_b || s.w2;
      bool pre1 = reveals_a(act.path) && knows_a;
      bool pre2 = reveals_b(act.path) && knows_b;
      if (pre1 && cr.a_matches()) s.w1 = true;
      if (pre2 && cr.b_matches()) s.w2 = true;
      out.processed = true;
      out.res = rtable()(act.path, p, s.w1, s.w2);
      out.ledger_mismatch = cr.concrete(act.path, p, ka, kb) != *out.res;
      break;
    }
  }
  return out;
}

StepOut step_f(FrmhState& s, const Action& act, Fault fault) {
  StepOut out;
  switch (act.kind) {
    case ActionKind::SetupB:
      if (!s.setup_b) s.setup_b = out.processed = true;
      break;
    case ActionKind::SetupA:
      if (s.setup_b && !s.setup_a) s.setup_a = out.processed = true;
      break;
    case ActionKind::Share:
      if (s.setup_a && !s.shared) s.shared = out.processed = true;
      break;
    case ActionKind::Publish:
      if (s.setup_a && !s.published) s.published = out.processed = true;
      break;
    case ActionKind::Init:
      if (s.published && !s.init) s.init = out.processed = true;
      break;
    case ActionKind::Redeem: {
      if (!s.init) break;
      int p = party_index(act.party);
      if ((p == 0 && s.shared && act.path == kPathDepA) || (p == 1 && reveals_a(act.path))) s.w1 = true;
      if (fault != Fault::SkipW2Update && p == 1 && reveals_b(act.path)) s.w2 = true;
      out.processed = true;
      out.res = rtable()(act.path, p, s.w1, s.w2);
      break;
    }
  }
  return out;
}

struct Knowledge {
  bool w1 = false, w2 = false, shared = false, init = false;
};

Knowledge knowledge(const PiState& s) { return {s.w1, s.w2, s.a_pre_a, s.g_init}; }
Knowledge knowledge(const FrmhState& s) { return {s.w1, s.w2, s.shared, s.init}; }

struct LemmaResult {
  const char* violation = nullptr;
  const char* flag = nullptr;
};

// Checks one step against the valid-transaction lemma.
LemmaResult lemma_check(const Knowledge& pre, const Knowledge& post, const Action& act, const StepOut& r) {
  LemmaResult out;
  if ((pre.w1 && !post.w1) || (pre.w2 && !post.w2) || (pre.shared && !post.shared)) {
    out.violation = "monotone";
    return out;
  }
  if (!pre.shared && post.shared && act.kind != ActionKind::Share) {
    out.violation = "effects";
    return out;
  }
  if (act.kind != ActionKind::Redeem) {
    if ((!pre.w1 && post.w1) || (!pre.w2 && post.w2)) out.violation = "effects";
    return out;
  }
  if (!r.res) return out;
  if (!pre.init) {
    out.violation = "phase";
    return out;
  }
  const bool res = *r.res;
  const int p = party_index(act.party);
  const std::uint8_t path = act.path;
  if (p == 1) {
    if (path != kPathDepA && !res) out.violation = "B-paths";
    if (path == kPathDepA && res) out.violation = "only";
  } else if (p == 0) {
    if (path == kPathDepA && res != (pre.w1 || pre.shared)) out.violation = "A-dep-A";
    if (merged(path) && res != ((pre.w1 || pre.shared) && pre.w2)) out.violation = "A-merged";
    if ((path == kPathDepB || path == kPathColB) && res) out.violation = "only";
  } else {
    if (merged(path) && res != (pre.w1 && pre.w2)) out.violation = "M-merged";
    if (!merged(path) && res) out.violation = "only";
  }
  if (out.violation) return out;

  if (res) {
    bool need_w1 = (p == 1 && merged(path)) || (p == 0 && (path == kPathDepA || merged(path)));
    bool need_w2 = (p == 1 && reveals_b(path)) || (p == 0 && merged(path));
    if ((need_w1 && !post.w1) || (need_w2 && !post.w2)) {
      out.violation = "effects";
      return out;
    }
  }
  if (!pre.w1 && post.w1) {
    bool listed = (p == 1 && merged(path)) || (p == 0 && (path == kPathDepA || merged(path)));
    if (p == 1 && path == kPathDepA)
      out.flag = "B-dep-A-reveals-pre_a";
    else if (!listed)
      out.violation = "effects";
    else if (!res)
      out.flag = "invalid-redeem-reveals-preimage";
  }
  if (!pre.w2 && post.w2) {
    bool listed = (p == 1 && reveals_b(path)) || (p == 0 && merged(path));
    if (!listed) out.violation = "effects";
  }
  return out;
}

nlohmann::json script_json(const ActionScript& s) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& a : s) j.push_back(to_string(a));
  return j;
}

}  // namespace

std::string to_string(const Action& a) {
  switch (a.kind) {
    case ActionKind::SetupB: return "setup-B";
    case ActionKind::SetupA: return "setup-A";
    case ActionKind::Share: return "share";
    case ActionKind::Publish: return "publish(" + to_string(a.party) + ")";
    case ActionKind::Init: return "init";
    case ActionKind::Redeem:
      return "redeem(" + std::string(kPartyNames[party_index(a.party)]) + "," + mad_paths().at(a.path) + ")";
  }
  return "?";
}

Action parse_action(std::string_view s) {
  for (const auto& a : action_alphabet())
    if (to_string(a) == s) return a;
  throw std::invalid_argument("unknown protocol action '" + std::string(s) + "'");
}

const std::vector<Action>& action_alphabet() {
  static const std::vector<Action> alpha = [] {
    std::vector<Action> v;
    v.push_back({ActionKind::SetupB, {}, 0});
    v.push_back({ActionKind::SetupA, {}, 0});
    v.push_back({ActionKind::Share, {}, 0});
    v.push_back({ActionKind::Publish, PartyId::alice(), 0});
    v.push_back({ActionKind::Publish, PartyId::bob(), 0});
    v.push_back({ActionKind::Init, {}, 0});
    for (PartyId p : {PartyId::alice(), PartyId::bob(), PartyId::miner(1)})
      for (std::uint8_t path = 0; path < 5; ++path) v.push_back({ActionKind::Redeem, p, path});
    return v;
  }();
  return alpha;
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::Setup: return "setup";
    case Phase::Initiation: return "initiation";
    case Phase::Redeeming: return "redeeming";
  }
  return "?";
}

TraceOutcome run_protocol(const ActionScript& script, bool with_share, std::uint64_t seed) {
  Crypto cr(seed);
  PiState s;
  TraceOutcome out;
  for (const auto& a : script) {
    StepOut r = step_pi(s, a, with_share, cr);
    if (a.kind == ActionKind::Redeem) out.redeem_results.push_back(r.res);
    if (r.ledger_mismatch) ++out.ledger_mismatches;
    if (r.processed && a.kind == ActionKind::Publish) out.mempool.push_back("init-tx by " + to_string(a.party));
    if (r.res && *r.res) out.mempool.push_back(to_string(a));
  }
  out.w1 = s.w1;
  out.w2 = s.w2;
  out.shared = s.a_pre_a;
  RoleState ra, rb, rm;
  ra.phase = s.phase[0];
  ra.has_digests = s.a_digests;
  ra.has_pre_a = s.a_pre_a;
  ra.has_init_tx = s.init_tx[0];
  ra.shared = s.a_pre_a;
  rb.phase = s.phase[1];
  rb.has_pre_a = rb.has_pre_b = rb.has_digests = s.b_secrets;
  rb.has_init_tx = s.init_tx[1];
  rb.shared = s.a_pre_a;
  rm.phase = s.phase[2];
  rm.has_init_tx = s.init_tx[2];
  out.roles = {{"A", ra}, {"B", rb}, {"M", rm}};
  if (s.w1) out.revealed.push_back("pre_a");
  if (s.w2) out.revealed.push_back("pre_b");
  return out;
}

TraceOutcome run_frmh(const ActionScript& script, Fault fault) {
  FrmhState s;
  TraceOutcome out;
  for (const auto& a : script) {
    StepOut r = step_f(s, a, fault);
    if (a.kind == ActionKind::Redeem) out.redeem_results.push_back(r.res);
    if (r.processed && a.kind == ActionKind::Publish) out.mempool.push_back("init-tx by " + to_string(a.party));
    if (r.res && *r.res) out.mempool.push_back(to_string(a));
  }
  out.frmh = s;
  out.w1 = s.w1;
  out.w2 = s.w2;
  out.shared = s.shared;
  if (s.w1) out.revealed.push_back("pre_a");
  if (s.w2) out.revealed.push_back("pre_b");
  return out;
}

namespace {

struct Checker {
  const ModelCheckOptions& opt;
  ModelCheckReport& rep;
  Crypto cr;
  const std::vector<Action>& alpha = action_alphabet();
  ActionScript prefix;
  std::map<std::string, std::uint64_t> flag_counts;
  std::map<std::string, nlohmann::json> flag_examples;

  Checker(const ModelCheckOptions& o, ModelCheckReport& r) : opt(o), rep(r), cr(o.seed) {}

  static std::string classify(const Action& a, const FrmhState& f_pre) {
    if (a.kind == ActionKind::Share && f_pre.init) return "share-after-init";
    if (a.kind == ActionKind::Redeem && a.party.is_alice() && merged(a.path) && f_pre.shared)
      return "merged-path-after-share";
    return "other";
  }

  void note_violation(const char* model, const char* bullet, bool minimal) {
    std::string key = std::string(model) + ":" + bullet;
    ++rep.violation_counts[key];
    if (minimal && rep.lemma1_violations.size() < opt.max_examples)
      rep.lemma1_violations.push_back({{"model", model}, {"bullet", bullet}, {"script", script_json(prefix)}});
  }

  void note_flag(const char* model, const char* name) {
    ++rep.flag_occurrences;
    std::string key = std::string(model) + ":" + name;
    if (flag_counts[key]++ == 0) flag_examples[key] = script_json(prefix);
  }

  void dfs(int depth, const PiState& pi, const FrmhState& f, bool results_diverged, bool discrepant_parent,
           bool pi_violated, bool f_violated) {
    for (const Action& a : alpha) {
      prefix.push_back(a);
      PiState pi2 = pi;
      FrmhState f2 = f;
      StepOut rp = step_pi(pi2, a, true, cr);
      StepOut rf = step_f(f2, a, opt.fault);
      ++rep.scripts_checked;
      if (rp.ledger_mismatch) ++rep.ledger_mismatches;

      bool rd = results_diverged || (a.kind == ActionKind::Redeem && rp.res != rf.res);
      Knowledge kp = knowledge(pi2), kf = knowledge(f2);
      bool discrepant = rd || kp.w1 != kf.w1 || kp.w2 != kf.w2 || kp.shared != kf.shared;
      if (discrepant) ++rep.discrepant_scripts;
      if (discrepant && !discrepant_parent) {
        std::string cls = classify(a, f);
        ++rep.discrepancy_classes[cls];
        ++rep.minimal_discrepancies;
        if (rep.discrepancies.size() < opt.max_examples) {
          nlohmann::json d;
          d["script"] = script_json(prefix);
          d["class"] = cls;
          d["protocol"] = {{"result", rp.res ? nlohmann::json(*rp.res) : nlohmann::json(nullptr)},
                           {"w1", kp.w1}, {"w2", kp.w2}, {"shared", kp.shared}};
          d["frmh"] = {{"result", rf.res ? nlohmann::json(*rf.res) : nlohmann::json(nullptr)},
                       {"w1", kf.w1}, {"w2", kf.w2}, {"shared", kf.shared}};
          rep.discrepancies.push_back(d);
        }
      }

      LemmaResult lp = lemma_check(knowledge(pi), kp, a, rp);
      LemmaResult lf = lemma_check(knowledge(f), kf, a, rf);
      if (lp.violation) note_violation("protocol", lp.violation, !pi_violated);
      if (lf.violation) note_violation("frmh", lf.violation, !f_violated);
      if (lp.flag) note_flag("protocol", lp.flag);
      if (lf.flag) note_flag("frmh", lf.flag);

      if (depth + 1 < opt.max_len)
        dfs(depth + 1, pi2, f2, rd, discrepant, pi_violated || lp.violation, f_violated || lf.violation);
      prefix.pop_back();
    }
  }
};

}  // namespace

ModelCheckReport model_check_lemma1(const ModelCheckOptions& opt) {
  if (opt.max_len < 1) throw std::invalid_argument("max_len must be at least 1");
  ModelCheckReport rep;
  Checker c(opt, rep);
  c.dfs(0, PiState{}, FrmhState{}, false, false, false, false);
  for (const auto& [key, n] : c.flag_counts) {
    auto colon = key.find(':');
    rep.flags.push_back({{"model", key.substr(0, colon)},
                         {"flag", key.substr(colon + 1)},
                         {"occurrences", n},
                         {"example", c.flag_examples[key]}});
  }
  return rep;
}

nlohmann::json ModelCheckReport::to_json() const {
  nlohmann::json j;
  j["scripts_checked"] = scripts_checked;
  j["discrepant_scripts"] = discrepant_scripts;
  j["minimal_discrepancies"] = minimal_discrepancies;
  j["discrepancy_classes"] = discrepancy_classes;
  j["discrepancies"] = discrepancies;
  j["lemma1_violation_counts"] = violation_counts;
  j["lemma1_violations"] = lemma1_violations;
  j["flags"] = flags;
  j["ledger_mismatches"] = ledger_mismatches;
  return j;
}

}  // namespace madlab
