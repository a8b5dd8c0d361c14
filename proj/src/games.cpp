#include "madlab/games.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <thread>

namespace madlab {

std::string to_string(GameKind g) { return g == GameKind::MadHtlc ? "mad-htlc" : "htlc"; }

std::string to_string(TxKind k) {
  switch (k) {
    case TxKind::Unrelated: return "unrelated";
    case TxKind::TxADep: return "txA_dep";
    case TxKind::TxBDep: return "txB_dep";
    case TxKind::TxBCol: return "txB_col";
    case TxKind::TxB3: return "txB_3";
    case TxKind::TxMDep: return "txM_dep";
    case TxKind::TxMCol: return "txM_col";
    case TxKind::TxM3: return "txM_3";
    case TxKind::TxAHtlc: return "txA_htlc";
    case TxKind::TxBHtlc: return "txB_htlc";
  }
  return "?";
}

std::vector<std::string> tx_names(TxSet s) {
  std::vector<std::string> out;
  for (unsigned k = 0; k <= 9; ++k)
    if (s & (1u << k)) out.push_back(to_string(static_cast<TxKind>(k)));
  return out;
}

std::string describe(const SubgameId& s) {
  std::ostringstream os;
  os << "k=" << s.k << " " << (s.red ? "red" : "irred") << " published={";
  auto names = tx_names(s.published);
  for (std::size_t i = 0; i < names.size(); ++i) os << (i ? "," : "") << names[i];
  os << "}";
  return os.str();
}

namespace {

void check_fee(const std::string& field, TokenAmount fee, TokenAmount f, TokenAmount cap, const std::string& cap_name) {
  if (!(f < fee && fee < cap))
    throw FieldError(field, field + " = " + std::to_string(fee) + " must be above the base fee f = " +
                                std::to_string(f) + " and below " + cap_name + " = " + std::to_string(cap));
}

}  // namespace

void GameConfig::validate() const {
  if (T < 1) throw FieldError("T", "timeout T must be at least 1");
  if (f <= 0) throw FieldError("f", "base fee f must be positive");
  if (v_dep <= 0) throw FieldError("v_dep", "v_dep must be positive");
  try {
    population.validate();
  } catch (const std::invalid_argument& e) {
    throw FieldError("population", e.what());
  }
  if (game == GameKind::MadHtlc) {
    if (v_col <= 0) throw FieldError("v_col", "v_col must be positive");
    check_fee("f_a_dep", f_a_dep, f, v_dep, "v_dep");
    check_fee("f_b_dep", f_b_dep, f, v_dep, "v_dep");
    check_fee("f_b_col", f_b_col, f, v_col, "v_col");
    check_fee("f_b_3", f_b_3, f, v_dep + v_col, "v_dep + v_col");
  } else {
    check_fee("f_a_htlc", f_a_htlc, f, v_dep, "v_dep");
    check_fee("f_b_htlc", f_b_htlc, f, v_dep, "v_dep");
  }
}

std::vector<TxKind> enumerate_actions(const SubgameId& s, const GameConfig& cfg, Actor actor) {
  std::vector<TxKind> out;
  const bool last = s.k == cfg.T;
  const TxSet P = s.published;
  if (cfg.game == GameKind::MadHtlc) {
    switch (actor) {
      case Actor::Miner: {
        out.push_back(TxKind::Unrelated);
        if (s.red && has(P, TxKind::TxADep)) out.push_back(TxKind::TxADep);
        if (last && s.red && has(P, TxKind::TxBDep)) out.push_back(TxKind::TxBDep);
        if (last && has(P, TxKind::TxBCol)) out.push_back(TxKind::TxBCol);
        if (last && s.red && has(P, TxKind::TxB3)) out.push_back(TxKind::TxB3);
        bool both = s.pre_a_revealed() && s.pre_b_revealed();
        if (both && s.red) out.push_back(TxKind::TxMDep);
        if (both && last) out.push_back(TxKind::TxMCol);
        if (both && s.red && last) out.push_back(TxKind::TxM3);
        break;
      }
      case Actor::Alice:
        if (cfg.alice_knows_pre_a && s.red && !has(P, TxKind::TxADep)) out.push_back(TxKind::TxADep);
        break;
      case Actor::Bob:
        if (s.red && !has(P, TxKind::TxBDep)) out.push_back(TxKind::TxBDep);
        if (!has(P, TxKind::TxBCol)) out.push_back(TxKind::TxBCol);
        if (s.red && !has(P, TxKind::TxB3)) out.push_back(TxKind::TxB3);
        break;
    }
  } else {
    switch (actor) {
      case Actor::Miner:
        out.push_back(TxKind::Unrelated);
        if (s.red && has(P, TxKind::TxAHtlc)) out.push_back(TxKind::TxAHtlc);
        if (last && s.red && has(P, TxKind::TxBHtlc)) out.push_back(TxKind::TxBHtlc);
        break;
      case Actor::Alice:
        if (cfg.alice_knows_pre_a && s.red && !has(P, TxKind::TxAHtlc)) out.push_back(TxKind::TxAHtlc);
        break;
      case Actor::Bob:
        if (s.red && !has(P, TxKind::TxBHtlc)) out.push_back(TxKind::TxBHtlc);
        break;
    }
  }
  return out;
}

std::optional<TxKind> prescribed_move(const SubgameId& s, const GameConfig& cfg, int mover) {
  auto avail = enumerate_actions(s, cfg, mover == 0 ? Actor::Alice : Actor::Bob);
  auto can = [&](TxKind k) { return std::find(avail.begin(), avail.end(), k) != avail.end(); };
  if (mover == 0) {
    TxKind mine = cfg.game == GameKind::MadHtlc ? TxKind::TxADep : TxKind::TxAHtlc;
    if (can(mine)) return mine;
    return std::nullopt;
  }
  if (s.k != cfg.T) return std::nullopt;
  if (cfg.game == GameKind::MadHtlc) {
    bool a_published = has(s.published, TxKind::TxADep);
    if (!a_published) {
      if (has(s.published, TxKind::TxB3)) return std::nullopt;
      if (can(TxKind::TxB3)) return TxKind::TxB3;
    }
    if (a_published && can(TxKind::TxBCol)) return TxKind::TxBCol;
    return std::nullopt;
  }
  if (!has(s.published, TxKind::TxAHtlc) && can(TxKind::TxBHtlc)) return TxKind::TxBHtlc;
  return std::nullopt;
}

namespace {

struct Step {
  Utilities reward;
  bool red_after = true;
};

Step apply(const GameConfig& cfg, const SubgameId& s, TxKind k, std::size_t i) {
  Step st{Utilities(cfg.miners()), s.red};
  Utilities& r = st.reward;
  const Rational vd(cfg.v_dep), vc(cfg.v_col);
  switch (k) {
    case TxKind::Unrelated: r.miner(i) = cfg.f; break;
    case TxKind::TxADep:
      r.miner(i) = cfg.f_a_dep;
      r.a() = vd - cfg.f_a_dep;
      r.p_a_confirmed() = 1;
      st.red_after = false;
      break;
    case TxKind::TxBDep:
      r.miner(i) = cfg.f_b_dep;
      r.b() = vd - cfg.f_b_dep;
      st.red_after = false;
      break;
    case TxKind::TxBCol:
      r.miner(i) = cfg.f_b_col;
      r.b() = vc - cfg.f_b_col;
      break;
    case TxKind::TxB3:
      r.miner(i) = cfg.f_b_3;
      r.b() = vd + vc - cfg.f_b_3;
      st.red_after = false;
      break;
    case TxKind::TxMDep:
      r.miner(i) = vd;
      st.red_after = false;
      break;
    case TxKind::TxMCol: r.miner(i) = vc; break;
    case TxKind::TxM3:
      r.miner(i) = vd + vc;
      st.red_after = false;
      break;
    case TxKind::TxAHtlc:
      r.miner(i) = cfg.f_a_htlc;
      r.a() = vd - cfg.f_a_htlc;
      r.p_a_confirmed() = 1;
      st.red_after = false;
      break;
    case TxKind::TxBHtlc:
      r.miner(i) = cfg.f_b_htlc;
      r.b() = vd - cfg.f_b_htlc;
      st.red_after = false;
      break;
  }
  return st;
}

void add_to(Utilities& acc, const Utilities& x, const Rational& w = Rational(1)) {
  for (std::size_t j = 0; j < acc.v.size(); ++j) acc.v[j] += w * x.v[j];
}

class Solver {
 public:
  explicit Solver(SpeSolution& sol) : sol_(sol), cfg_(sol.cfg) {}

  const PubNode& pub(const PubKey& key) {
    auto it = sol_.pub.find(key);
    if (it != sol_.pub.end()) return it->second;

    const Actor actor = key.mover == 0 ? Actor::Alice : Actor::Bob;
    auto own = [&](const Utilities& u) -> const Rational& { return key.mover == 0 ? u.a() : u.b(); };
    std::optional<TxKind> pres = prescribed_move(key.s, cfg_, key.mover);

    struct Option {
      std::optional<TxKind> act;
      Utilities value;
    };
    std::vector<Option> opts;
    opts.push_back({std::nullopt, after_pass(key)});
    for (TxKind t : enumerate_actions(key.s, cfg_, actor)) {
      PubKey nk{SubgameId{key.s.k, key.s.red, with(key.s.published, t)}, 1 - key.mover, 0};
      opts.push_back({t, pub(nk).value});
    }
    Rational best = own(opts[0].value);
    for (const auto& o : opts) best = std::max(best, own(o.value));
    std::vector<const Option*> top;
    for (const auto& o : opts)
      if (own(o.value) == best) top.push_back(&o);
    // prescribed, then pass, then lowest id
    const Option* pick = nullptr;
    for (auto* o : top)
      if (o->act == pres) pick = o;
    if (!pick)
      for (auto* o : top)
        if (!o->act) pick = o;
    if (!pick) pick = top.front();
    PubNode node{pick->act, top.size() > 1, pick->value};
    return sol_.pub.emplace(key, std::move(node)).first->second;
  }

  const MinerNode& miner(const SubgameId& s) {
    auto it = sol_.miner.find(s);
    if (it != sol_.miner.end()) return it->second;
    const std::size_t n = cfg_.miners();
    MinerNode node;
    node.value = Utilities(n);
    auto acts = enumerate_actions(s, cfg_, Actor::Miner);
    for (std::size_t i = 0; i < n; ++i) {
      std::optional<Utilities> best_total;
      Rational best;
      TxKind best_act = TxKind::Unrelated;
      int count = 0;
      for (TxKind a : acts) {  // ascending id, unrelated first
        Step st = apply(cfg_, s, a, i);
        Utilities total = st.reward;
        add_to(total, next_round(s, st.red_after));
        const Rational& mine = total.miner(i);
        if (!best_total || mine > best) {
          best_total = total;
          best = mine;
          best_act = a;
          count = 1;
        } else if (mine == best) {
          ++count;
        }
      }
      node.action.push_back(best_act);
      node.tie.push_back(count > 1);
      add_to(node.value, *best_total, cfg_.population.powers[i]);
    }
    return sol_.miner.emplace(s, std::move(node)).first->second;
  }

 private:
  Utilities after_pass(const PubKey& key) {
    if (key.passes == 1) return miner(key.s).value;
    return pub(PubKey{key.s, 1 - key.mover, 1}).value;
  }

  Utilities next_round(const SubgameId& s, bool red) {
    if (s.k >= cfg_.T) return Utilities(cfg_.miners());
    return pub(PubKey{SubgameId{s.k + 1, red, s.published}, 0, 0}).value;
  }

  SpeSolution& sol_;
  const GameConfig& cfg_;
};

}  // namespace

const PubNode& SpeSolution::at(const SubgameId& s, int mover, int passes) const {
  auto it = pub.find(PubKey{s, mover, passes});
  if (it == pub.end()) throw std::out_of_range("subgame not in solution: " + describe(s));
  return it->second;
}

const MinerNode& SpeSolution::miners_at(const SubgameId& s) const {
  auto it = miner.find(s);
  if (it == miner.end()) throw std::out_of_range("miner node not in solution: " + describe(s));
  return it->second;
}

SpeSolution solve_spe(const GameConfig& cfg) {
  cfg.validate();
  SpeSolution sol;
  sol.cfg = cfg;
  Solver solver(sol);
  // Solve the whole lattice so deviations can be evaluated anywhere.
  std::vector<TxKind> pubs = cfg.game == GameKind::MadHtlc
                                 ? std::vector<TxKind>{TxKind::TxADep, TxKind::TxBDep, TxKind::TxBCol, TxKind::TxB3}
                                 : std::vector<TxKind>{TxKind::TxAHtlc, TxKind::TxBHtlc};
  for (std::int64_t k = cfg.T; k >= 1; --k)
    for (unsigned m = 0; m < (1u << pubs.size()); ++m) {
      TxSet P = 0;
      for (std::size_t j = 0; j < pubs.size(); ++j)
        if (m & (1u << j)) P = with(P, pubs[j]);
      for (bool red : {true, false})
        for (int mover : {0, 1})
          for (int passes : {0, 1}) solver.pub(PubKey{SubgameId{k, red, P}, mover, passes});
    }
  sol.root = sol.at(SubgameId{1, true, 0}).value;

  for (const auto& [s, node] : sol.miner)
    for (bool t : node.tie) sol.ties_total += t;

  // equilibrium path: every miner has positive probability
  std::set<PubKey> seen;
  std::vector<PubKey> stack = {PubKey{SubgameId{1, true, 0}, 0, 0}};
  while (!stack.empty()) {
    PubKey key = stack.back();
    stack.pop_back();
    if (!seen.insert(key).second) continue;
    const PubNode& node = sol.pub.at(key);
    if (node.action) {
      stack.push_back(PubKey{SubgameId{key.s.k, key.s.red, with(key.s.published, *node.action)}, 1 - key.mover, 0});
      continue;
    }
    if (key.passes == 0) {
      stack.push_back(PubKey{key.s, 1 - key.mover, 1});
      continue;
    }
    const MinerNode& mn = sol.miners_at(key.s);
    for (std::size_t i = 0; i < mn.action.size(); ++i) {
      if (mn.tie[i]) {
        ++sol.ties_on_path;
        sol.unique = false;
      }
      if (key.s.k < cfg.T) {
        bool red = apply(cfg, key.s, mn.action[i], i).red_after;
        stack.push_back(PubKey{SubgameId{key.s.k + 1, red, key.s.published}, 0, 0});
      }
    }
  }
  sol.attack_spe = cfg.alice_knows_pre_a && sol.root.p_a_confirmed() == 0;
  return sol;
}

Rational htlc_threshold(const GameConfig& cfg) {
  TokenAmount fa = cfg.game == GameKind::Htlc ? cfg.f_a_htlc : cfg.f_a_dep;
  return Rational(fa - cfg.f) / cfg.population.lambda_min() + cfg.f;
}

ClosedForm closed_form_utility(GameKind g, std::size_t i, std::int64_t k, bool red, const GameConfig& cfg) {
  ClosedForm out;
  if (g != GameKind::Htlc || i >= cfg.miners() || k < 1 || k > cfg.T) return out;
  const Rational& li = cfg.population.powers[i];
  if (!red) {
    out.applicable = true;
    out.lemma = "irred";
    out.value = li * (cfg.T - k + 1) * cfg.f;
    return out;
  }
  if (Rational(cfg.f_b_htlc) <= htlc_threshold(cfg)) return out;
  out.applicable = true;
  if (k == cfg.T) {
    out.lemma = "last-round";
    out.value = li * cfg.f_b_htlc;
  } else {
    out.lemma = "withhold";
    out.value = li * ((cfg.T - k) * cfg.f + cfg.f_b_htlc);
  }
  return out;
}

PartyStrategy prescribed_strategy(const GameConfig& cfg, int mover) {
  return [cfg, mover](const SubgameId& s) {
    auto m = prescribed_move(s, cfg, mover);
    return m ? Move::publish(*m) : Move::pass();
  };
}

namespace {

class ProfileEval {
 public:
  ProfileEval(const SpeSolution& sol, const PartyStrategy& a, const PartyStrategy& b)
      : sol_(sol), cfg_(sol.cfg), a_(a), b_(b) {}

  Utilities pub(const PubKey& key) {
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    Move m = (key.mover == 0 ? a_ : b_)(key.s);
    std::optional<TxKind> act;
    if (m.kind == Move::Kind::Spe) {
      act = sol_.pub.at(key).action;
    } else if (m.kind == Move::Kind::Publish) {
      auto avail = enumerate_actions(key.s, cfg_, key.mover == 0 ? Actor::Alice : Actor::Bob);
      if (std::find(avail.begin(), avail.end(), m.tx) != avail.end()) act = m.tx;
    }
    Utilities v;
    if (act)
      v = pub(PubKey{SubgameId{key.s.k, key.s.red, with(key.s.published, *act)}, 1 - key.mover, 0});
    else if (key.passes == 1)
      v = miner(key.s);
    else
      v = pub(PubKey{key.s, 1 - key.mover, 1});
    memo_.emplace(key, v);
    return v;
  }

 private:
  Utilities miner(const SubgameId& s) {
    const MinerNode& mn = sol_.miners_at(s);
    Utilities out(cfg_.miners());
    for (std::size_t i = 0; i < mn.action.size(); ++i) {
      Step st = apply(cfg_, s, mn.action[i], i);
      Utilities total = st.reward;
      if (s.k < cfg_.T) add_to(total, pub(PubKey{SubgameId{s.k + 1, st.red_after, s.published}, 0, 0}));
      add_to(out, total, cfg_.population.powers[i]);
    }
    return out;
  }

  const SpeSolution& sol_;
  const GameConfig& cfg_;
  const PartyStrategy& a_;
  const PartyStrategy& b_;
  std::map<PubKey, Utilities> memo_;
};

}  // namespace

Utilities evaluate_profile(const SpeSolution& sol, const PartyStrategy& a, const PartyStrategy& b) {
  ProfileEval ev(sol, a, b);
  return ev.pub(PubKey{SubgameId{1, true, 0}, 0, 0});
}

DeviationReport verify_mad(const GameConfig& cfg) {
  if (cfg.game != GameKind::MadHtlc) throw std::invalid_argument("verify needs a mad-htlc game");
  SpeSolution sol = solve_spe(cfg);
  DeviationReport rep;
  PartyStrategy pa = prescribed_strategy(cfg, 0);
  PartyStrategy pb = prescribed_strategy(cfg, 1);
  rep.prescribed = evaluate_profile(sol, pa, pb);
  rep.spe = sol.root;
  rep.spe_matches_prescribed = rep.prescribed.v == rep.spe.v;

  auto add = [&](const std::string& who, const std::string& name, const PartyStrategy& a, const PartyStrategy& b,
                 bool strict) {
    Utilities u = evaluate_profile(sol, a, b);
    DeviationResult d;
    d.who = who;
    d.name = name;
    d.deviation = who == "A" ? u.a() : u.b();
    d.prescribed = who == "A" ? rep.prescribed.a() : rep.prescribed.b();
    d.strict = strict;
    d.ok = strict ? d.deviation < d.prescribed : d.deviation <= d.prescribed;
    rep.deviations.push_back(d);
  };

  const std::int64_t T = cfg.T;
  if (cfg.alice_knows_pre_a) {
    add("A", "never-publish", [](const SubgameId&) { return Move::pass(); }, pb, true);
    add("A", "publish-only-at-T",
        [T](const SubgameId& s) { return s.k == T ? Move::publish(TxKind::TxADep) : Move::pass(); }, pb, false);
    auto when_a_published = [pb](TxKind t) {
      return [pb, t](const SubgameId& s) {
        if (has(s.published, TxKind::TxADep) && !has(s.published, t)) return Move::publish(t);
        return pb(s);
      };
    };
    add("B", "txB_dep-while-A-publishes", pa, when_a_published(TxKind::TxBDep), false);
    add("B", "txB_3-while-A-publishes", pa, when_a_published(TxKind::TxB3), false);
  } else {
    add("B", "txB_dep-and-txB_col-instead-of-txB_3", pa,
        [T](const SubgameId& s) {
          if (s.k != T) return Move::pass();
          if (!has(s.published, TxKind::TxBDep)) return Move::publish(TxKind::TxBDep);
          return Move::publish(TxKind::TxBCol);
        },
        false);
    add("B", "txB_dep-only", pa,
        [T](const SubgameId& s) {
          if (s.k == T && !has(s.published, TxKind::TxBDep)) return Move::publish(TxKind::TxBDep);
          return Move::pass();
        },
        false);
    add("B", "no-publication", pa, [](const SubgameId&) { return Move::pass(); }, false);
  }
  add("B", "early-txB_col", pa,
      [pb](const SubgameId& s) {
        if (!has(s.published, TxKind::TxBCol) && has(s.published, TxKind::TxADep)) return Move::publish(TxKind::TxBCol);
        return pb(s);
      },
      false);
  add("B", "no-txB_col", pa,
      [pb](const SubgameId& s) {
        Move m = pb(s);
        if (m.kind == Move::Kind::Publish && m.tx == TxKind::TxBCol) return Move::pass();
        return m;
      },
      false);

  // Last round with both sides published: miners seize everything.
  for (TxSet P : {TxSet(0), with(0, TxKind::TxBDep), with(0, TxKind::TxB3),
                  with(with(0, TxKind::TxBDep), TxKind::TxBCol), with(with(0, TxKind::TxB3), TxKind::TxBCol)}) {
    if (P == 0) continue;
    P = with(P, TxKind::TxADep);
    for (bool red : {true, false}) {
      SubgameId s{T, red, P};
      const MinerNode& mn = sol.miners_at(s);
      TxKind want = red ? TxKind::TxM3 : TxKind::TxMCol;
      for (std::size_t i = 0; i < mn.action.size(); ++i) {
        MinerCheck c{describe(s), i + 1, to_string(want), to_string(mn.action[i]), !mn.tie[i], false};
        c.ok = mn.action[i] == want && !mn.tie[i];
        rep.last_round.push_back(c);
      }
    }
  }

  rep.ok = rep.spe_matches_prescribed;
  for (const auto& d : rep.deviations) rep.ok = rep.ok && d.ok;
  for (const auto& c : rep.last_round) rep.ok = rep.ok && c.ok;
  return rep;
}

nlohmann::json to_json(const Utilities& u) {
  nlohmann::json j;
  j["A"] = to_string(u.a());
  j["B"] = to_string(u.b());
  nlohmann::json m = nlohmann::json::array();
  for (std::size_t i = 0; i + 3 < u.v.size(); ++i) m.push_back(to_string(u.miner(i)));
  j["miners"] = m;
  j["p_a_confirmed"] = to_string(u.p_a_confirmed());
  return j;
}

nlohmann::json DeviationReport::to_json() const {
  nlohmann::json j;
  j["prescribed"] = madlab::to_json(prescribed);
  j["spe"] = madlab::to_json(spe);
  j["spe_matches_prescribed"] = spe_matches_prescribed;
  nlohmann::json devs = nlohmann::json::array();
  for (const auto& d : deviations)
    devs.push_back({{"who", d.who},
                    {"deviation", d.name},
                    {"utility", to_string(d.deviation)},
                    {"prescribed", to_string(d.prescribed)},
                    {"margin", to_string(d.prescribed - d.deviation)},
                    {"strict", d.strict},
                    {"ok", d.ok}});
  j["deviations"] = devs;
  nlohmann::json lr = nlohmann::json::array();
  for (const auto& c : last_round)
    lr.push_back({{"state", c.state},
                  {"miner", "M" + std::to_string(c.miner)},
                  {"expected", c.expected},
                  {"actual", c.actual},
                  {"unique", c.unique},
                  {"ok", c.ok}});
  j["last_round"] = lr;
  j["profitable_deviations"] =
      std::count_if(deviations.begin(), deviations.end(), [](const DeviationResult& d) { return !d.ok; });
  j["ok"] = ok;
  return j;
}

nlohmann::json to_json(const SpeSolution& sol) {
  const GameConfig& cfg = sol.cfg;
  nlohmann::json j;
  j["game"] = to_string(cfg.game);
  j["T"] = cfg.T;
  j["alice_knows_pre_a"] = cfg.alice_knows_pre_a;
  j["u_A"] = to_string(sol.root.a());
  j["u_B"] = to_string(sol.root.b());
  nlohmann::json um = nlohmann::json::array();
  for (std::size_t i = 0; i < cfg.miners(); ++i) um.push_back(to_string(sol.root.miner(i)));
  j["u_miners"] = um;
  j["p_a_confirmed"] = to_string(sol.root.p_a_confirmed());
  j["attack_spe"] = sol.attack_spe;
  j["unique"] = sol.unique;
  j["ties_on_path"] = sol.ties_on_path;
  j["ties_total"] = sol.ties_total;
  if (cfg.game == GameKind::Htlc) j["bribe_threshold"] = to_string(htlc_threshold(cfg));
  nlohmann::json subs = nlohmann::json::array();
  for (const auto& [s, mn] : sol.miner) {
    nlohmann::json e;
    e["k"] = s.k;
    e["dep"] = s.red ? "red" : "irred";
    e["published"] = tx_names(s.published);
    nlohmann::json ms = nlohmann::json::array();
    for (std::size_t i = 0; i < mn.action.size(); ++i)
      ms.push_back({{"miner", "M" + std::to_string(i + 1)},
                    {"action", to_string(mn.action[i])},
                    {"tie", static_cast<bool>(mn.tie[i])}});
    e["miners"] = ms;
    const PubNode& start = sol.at(s);
    e["value"] = to_json(start.value);
    auto pa = sol.at(s, 0, 0).action;
    auto pb = sol.at(s, 1, 1).action;
    e["A"] = pa ? to_string(*pa) : "pass";
    e["B_after_A_pass"] = pb ? to_string(*pb) : "pass";
    subs.push_back(e);
  }
  j["subgames"] = subs;
  return j;
}

std::string to_csv(const SpeSolution& sol) {
  std::ostringstream os;
  os << "k,state,actor,action,utility\n";
  for (const auto& [s, mn] : sol.miner) {
    std::string state = std::string(s.red ? "red" : "irred");
    auto names = tx_names(s.published);
    state += ";";
    for (std::size_t i = 0; i < names.size(); ++i) state += (i ? "+" : "") + names[i];
    const PubNode& start = sol.at(s);
    auto pa = start.action;
    os << s.k << "," << state << ",A," << (pa ? to_string(*pa) : "pass") << "," << to_string(start.value.a()) << "\n";
    auto pb = sol.at(s, 1, 1).action;
    os << s.k << "," << state << ",B," << (pb ? to_string(*pb) : "pass") << ","
       << to_string(sol.at(s, 1, 1).value.b()) << "\n";
    for (std::size_t i = 0; i < mn.action.size(); ++i)
      os << s.k << "," << state << ",M" << i + 1 << "," << to_string(mn.action[i]) << ","
         << to_string(mn.value.miner(i)) << "\n";
  }
  return os.str();
}

std::vector<SweepPoint> sweep_fee(const GameConfig& cfg, const std::string& field, const std::vector<TokenAmount>& values) {
  std::vector<SweepPoint> out;
  for (TokenAmount v : values) {
    GameConfig c = cfg;
    if (field == "f_a_dep") c.f_a_dep = v;
    else if (field == "f_b_dep") c.f_b_dep = v;
    else if (field == "f_b_col") c.f_b_col = v;
    else if (field == "f_b_3") c.f_b_3 = v;
    else if (field == "f_a_htlc") c.f_a_htlc = v;
    else if (field == "f_b_htlc") c.f_b_htlc = v;
    else throw std::invalid_argument("cannot sweep field '" + field + "'");
    SpeSolution s = solve_spe(c);
    out.push_back(SweepPoint{v, s.root, s.attack_spe});
  }
  return out;
}

// Monte Carlo ---------------------------------------------------------------

MinerPolicy parse_miner_policy(const std::string& s) {
  if (s == "spe" || s == "non-myopic") return MinerPolicy::NonMyopicSpe;
  if (s == "myopic") return MinerPolicy::Myopic;
  throw std::invalid_argument("unknown miner policy '" + s + "' (expected spe or myopic)");
}

AStrategy parse_a_strategy(const std::string& s) {
  if (s == "prescribed") return AStrategy::Prescribed;
  if (s == "spe") return AStrategy::Spe;
  if (s == "withhold") return AStrategy::Withhold;
  throw std::invalid_argument("unknown A strategy '" + s + "' (expected prescribed, spe or withhold)");
}

BStrategy parse_b_strategy(const std::string& s) {
  if (s == "prescribed") return BStrategy::Prescribed;
  if (s == "spe") return BStrategy::Spe;
  if (s == "bribe") return BStrategy::Bribe;
  throw std::invalid_argument("unknown B strategy '" + s + "' (expected prescribed, spe or bribe)");
}

std::string to_string(MinerPolicy p) { return p == MinerPolicy::Myopic ? "myopic" : "spe"; }
std::string to_string(AStrategy s) {
  return s == AStrategy::Prescribed ? "prescribed" : s == AStrategy::Spe ? "spe" : "withhold";
}
std::string to_string(BStrategy s) {
  return s == BStrategy::Prescribed ? "prescribed" : s == BStrategy::Spe ? "spe" : "bribe";
}

namespace {

struct TrialResult {
  std::vector<double> u;  // A, B, miners
  bool a_confirmed = false;
  bool attack = false;
};

class Trial {
 public:
  Trial(const GameConfig& cfg, const SpeSolution& sol, const SimOptions& opt, const MinerSampler& sampler,
        std::uint64_t seed)
      : cfg_(cfg), sol_(sol), opt_(opt), sampler_(sampler), rng_(seed), mempool_(BaseFeeStream(cfg.f)) {
    pre_a_ = random_preimage(rng_);
    pre_b_ = random_preimage(rng_);
    while (pre_b_ == pre_a_) pre_b_ = random_preimage(rng_);
    Digest da = hash(pre_a_), db = hash(pre_b_);
    Transaction init;
    init.id = "init";
    init.creator = PartyId::external();
    if (cfg.game == GameKind::MadHtlc) {
      init.outputs.push_back(Contract{"dep", cfg.v_dep, make_mh_dep(PartyId::alice(), PartyId::bob(), cfg.T, da, db), {}});
      init.outputs.push_back(Contract{"col", cfg.v_col, make_mh_col(PartyId::bob(), cfg.T, da, db), {}});
      init.account_debit = cfg.v_dep + cfg.v_col;
    } else {
      init.outputs.push_back(Contract{"dep", cfg.v_dep, make_htlc(PartyId::alice(), PartyId::bob(), cfg.T, da), {}});
      init.account_debit = cfg.v_dep;
    }
    chain_.append(PartyId::external(), init);
    mempool_.on_block(chain_, init);
  }

  TrialResult run(std::vector<RoundOutcome>* trace) {
    const std::size_t n = cfg_.miners();
    std::vector<SelectionPolicy> policies(n);
    for (std::size_t i = 0; i < n; ++i) {
      MinerPolicy p = opt_.policies.empty() ? MinerPolicy::NonMyopicSpe : opt_.policies[i];
      if (p == MinerPolicy::Myopic) {
        policies[i] = myopic_policy();
      } else {
        policies[i] = [this, i](const Chain&, const Mempool&, std::int64_t, PartyId miner) {
          TxKind k = sol_.miners_at(state()).action[i];
          return build(k, miner);
        };
      }
    }
    for (k_ = 1; k_ <= cfg_.T; ++k_) {
      publication_step();
      RoundOutcome r = advance_round(chain_, mempool_, sampler_, policies, rng_);
      if (trace) trace->push_back(r);
    }
    TrialResult out;
    out.u.push_back(static_cast<double>(chain_.balance(PartyId::alice())));
    out.u.push_back(static_cast<double>(chain_.balance(PartyId::bob())));
    for (std::size_t i = 0; i < n; ++i)
      out.u.push_back(static_cast<double>(chain_.balance(PartyId::miner(static_cast<int>(i) + 1))));
    const auto& dep = chain_.contract("dep");
    std::string by = dep.redeemed_by.value_or("");
    out.a_confirmed = by == "txA_dep" || by == "txA_htlc";
    out.attack = by == "txB_dep" || by == "txB_3" || by == "txB_htlc";
    return out;
  }

 private:
  bool red() const { return !chain_.contract("dep").redeemed_by; }
  SubgameId state() const { return SubgameId{k_, red(), published_}; }

  std::optional<TxKind> choose(int mover, int passes) {
    SubgameId s = state();
    if (mover == 0) {
      switch (opt_.a) {
        case AStrategy::Prescribed: return prescribed_move(s, cfg_, 0);
        case AStrategy::Spe: return sol_.at(s, 0, passes).action;
        case AStrategy::Withhold: return std::nullopt;
      }
    }
    switch (opt_.b) {
      case BStrategy::Prescribed: return prescribed_move(s, cfg_, 1);
      case BStrategy::Spe: return sol_.at(s, 1, passes).action;
      case BStrategy::Bribe: {
        TxKind t = cfg_.game == GameKind::Htlc ? TxKind::TxBHtlc : TxKind::TxB3;
        auto avail = enumerate_actions(s, cfg_, Actor::Bob);
        if (std::find(avail.begin(), avail.end(), t) != avail.end()) return t;
        return std::nullopt;
      }
    }
    return std::nullopt;
  }

  void publication_step() {
    int mover = 0, passes = 0;
    while (passes < 2) {
      auto t = choose(mover, passes);
      if (t) {
        mempool_.publish(*build(*t, mover == 0 ? PartyId::alice() : PartyId::bob()), chain_);
        published_ = with(published_, *t);
        passes = 0;
      } else {
        ++passes;
      }
      mover = 1 - mover;
    }
  }

  TxInput input(const std::string& contract, std::string_view path, bool a, bool b) const {
    TxInput in;
    in.contract_id = contract;
    in.witness.path = std::string(path);
    if (a) in.witness.pre1 = pre_a_;
    if (b) in.witness.pre2 = pre_b_;
    return in;
  }

  std::optional<Transaction> build(TxKind k, PartyId who) const {
    Transaction tx;
    tx.creator = who;
    const TokenAmount vd = cfg_.v_dep, vc = cfg_.v_col;
    auto redeem = [&](TokenAmount fee, TokenAmount amount) {
      tx.fee = fee;
      tx.payout = amount - fee;
    };
    switch (k) {
      case TxKind::Unrelated:
        for (const auto& [id, t] : mempool_.txs())
          if (t.creator == PartyId::external() && t.inputs.empty()) return t;
        return std::nullopt;
      case TxKind::TxADep:
        tx.inputs.push_back(input("dep", kDepA, true, false));
        redeem(cfg_.f_a_dep, vd);
        break;
      case TxKind::TxBDep:
        tx.inputs.push_back(input("dep", kDepB, false, true));
        redeem(cfg_.f_b_dep, vd);
        break;
      case TxKind::TxBCol:
        tx.inputs.push_back(input("col", kColB, false, false));
        redeem(cfg_.f_b_col, vc);
        break;
      case TxKind::TxB3:
        tx.inputs.push_back(input("dep", kDepB, false, true));
        tx.inputs.push_back(input("col", kColB, false, false));
        redeem(cfg_.f_b_3, vd + vc);
        break;
      case TxKind::TxMDep:
      case TxKind::TxMCol:
      case TxKind::TxM3: {
        const auto& rev = mempool_.revealed();
        if (!rev.count(pre_a_) || !rev.count(pre_b_)) throw std::logic_error("miner lacks revealed preimages");
        if (k != TxKind::TxMCol) tx.inputs.push_back(input("dep", kDepM, true, true));
        if (k != TxKind::TxMDep) tx.inputs.push_back(input("col", kColM, true, true));
        tx.fee = (k == TxKind::TxMDep ? vd : 0) + (k == TxKind::TxMCol ? vc : 0) + (k == TxKind::TxM3 ? vd + vc : 0);
        break;
      }
      case TxKind::TxAHtlc:
        tx.inputs.push_back(input("dep", kHtlcA, true, false));
        redeem(cfg_.f_a_htlc, vd);
        break;
      case TxKind::TxBHtlc:
        tx.inputs.push_back(input("dep", kHtlcB, false, false));
        redeem(cfg_.f_b_htlc, vd);
        break;
    }
    tx.id = to_string(k);
    bool self_made = k == TxKind::TxMDep || k == TxKind::TxMCol || k == TxKind::TxM3;
    if (self_made) {
      tx.id += "@" + to_string(who);
      return tx;
    }
    if (auto it = mempool_.txs().find(tx.id); it != mempool_.txs().end()) return it->second;
    if (who.is_miner()) return std::nullopt;
    return tx;
  }

  const GameConfig& cfg_;
  const SpeSolution& sol_;
  const SimOptions& opt_;
  const MinerSampler& sampler_;
  std::mt19937_64 rng_;
  Chain chain_;
  Mempool mempool_;
  Preimage pre_a_, pre_b_;
  TxSet published_ = 0;
  std::int64_t k_ = 1;
};

}  // namespace

SimReport simulate(const GameConfig& cfg, const SimOptions& opt) {
  cfg.validate();
  if (opt.trials < 1) throw std::invalid_argument("trials must be at least 1");
  if (!opt.policies.empty() && opt.policies.size() != cfg.miners())
    throw std::invalid_argument("one policy per miner is required");
  SpeSolution sol = solve_spe(cfg);
  MinerSampler sampler(cfg.population);

  std::vector<TrialResult> results(opt.trials);
  auto work = [&](unsigned t0, unsigned step) {
    for (std::uint64_t t = t0; t < opt.trials; t += step) {
      Trial trial(cfg, sol, opt, sampler, derive_seed(opt.seed, t));
      std::vector<RoundOutcome> trace;
      results[t] = trial.run(t == 0 && opt.trace_sink ? &trace : nullptr);
      if (t == 0 && opt.trace_sink) opt.trace_sink(trace);
    }
  };
  unsigned jobs = std::max(1u, opt.jobs);
  if (jobs == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(work, j, jobs);
    for (auto& th : pool) th.join();
  }

  SimReport rep;
  rep.trials = opt.trials;
  rep.seed = opt.seed;
  const std::size_t m = cfg.miners() + 2;
  std::vector<double> sum(m, 0), sq(m, 0);
  for (const auto& r : results) {  // trial order
    rep.a_confirmed += r.a_confirmed;
    rep.attack_success += r.attack;
    for (std::size_t j = 0; j < m; ++j) {
      sum[j] += r.u[j];
      sq[j] += r.u[j] * r.u[j];
    }
  }
  const double n = static_cast<double>(opt.trials);
  for (std::size_t j = 0; j < m; ++j) {
    double mean = sum[j] / n;
    double var = std::max(0.0, sq[j] / n - mean * mean);
    rep.mean.push_back(mean);
    rep.ci95.push_back(1.96 * std::sqrt(var / n));
  }
  return rep;
}

nlohmann::json SimReport::to_json() const {
  nlohmann::json j;
  j["trials"] = trials;
  j["seed"] = seed;
  j["a_confirmed"] = a_confirmed;
  j["a_confirmed_rate"] = a_confirmed_rate();
  j["attack_success"] = attack_success;
  j["attack_success_rate"] = success_rate();
  double p = success_rate();
  j["attack_success_ci95"] = trials ? 1.96 * std::sqrt(p * (1 - p) / static_cast<double>(trials)) : 0.0;
  nlohmann::json u;
  u["A"] = {{"mean", mean.at(0)}, {"ci95", ci95.at(0)}};
  u["B"] = {{"mean", mean.at(1)}, {"ci95", ci95.at(1)}};
  nlohmann::json ms = nlohmann::json::array();
  for (std::size_t i = 2; i < mean.size(); ++i) ms.push_back({{"mean", mean[i]}, {"ci95", ci95[i]}});
  u["miners"] = ms;
  j["utilities"] = u;
  return j;
}

}  // namespace madlab
