#include "madlab/contracts.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace madlab {

const std::vector<std::string>& mad_paths() {
  static const std::vector<std::string> p = {std::string(kDepA), std::string(kDepB), std::string(kDepM),
                                             std::string(kColB), std::string(kColM)};
  return p;
}

Predicate Predicate::all(std::vector<Predicate> c) {
  Predicate p;
  p.kind = Kind::And;
  p.children = std::move(c);
  return p;
}

Predicate Predicate::any(std::vector<Predicate> c) {
  Predicate p;
  p.kind = Kind::Or;
  p.children = std::move(c);
  return p;
}

Predicate Predicate::sig(PartyId pk) {
  Predicate p;
  p.kind = Kind::VSig;
  p.pk = pk;
  return p;
}

Predicate Predicate::preimg(int slot, Digest dig) {
  if (slot != 1 && slot != 2) throw std::invalid_argument("preimage slot must be 1 or 2");
  Predicate p;
  p.kind = Kind::VPreImg;
  p.slot = slot;
  p.dig = std::move(dig);
  return p;
}

Predicate Predicate::after(std::int64_t t) {
  Predicate p;
  p.kind = Kind::VTime;
  p.timeout = t;
  return p;
}

const Predicate* PredicateAst::find(std::string_view path) const {
  for (const auto& [name, node] : paths)
    if (name == path) return &node;
  return nullptr;
}

Predicate PredicateAst::root() const {
  std::vector<Predicate> c;
  c.reserve(paths.size());
  for (const auto& [name, node] : paths) c.push_back(node);
  return Predicate::any(std::move(c));
}

namespace {

void check_timeout(std::int64_t T) {
  if (T < 1) throw std::invalid_argument("timeout T must be at least 1");
}

void check_digest(const Digest& d) {
  if (d.empty()) throw std::invalid_argument("empty digest");
}

bool has_vtime(const Predicate& n) {
  if (n.kind == Predicate::Kind::VTime) return true;
  return std::any_of(n.children.begin(), n.children.end(), has_vtime);
}

void collect_slots(const Predicate& n, std::set<int>& out) {
  if (n.kind == Predicate::Kind::VPreImg) out.insert(n.slot);
  for (const auto& c : n.children) collect_slots(c, out);
}

void collect_timeouts(const Predicate& n, std::vector<std::int64_t>& out) {
  if (n.kind == Predicate::Kind::VTime) out.push_back(n.timeout);
  for (const auto& c : n.children) collect_timeouts(c, out);
}

bool preimage_matches(const std::optional<Preimage>& pre, const Digest& dig) {
  if (!pre) return false;
  return hash(*pre, static_cast<unsigned>(dig.size() * 8)) == dig;
}

bool eval_node(const Predicate& n, const RedeemWitness& w, std::int64_t init, std::int64_t at) {
  switch (n.kind) {
    case Predicate::Kind::And:
      for (const auto& c : n.children)
        if (!eval_node(c, w, init, at)) return false;
      return true;
    case Predicate::Kind::Or:
      for (const auto& c : n.children)
        if (eval_node(c, w, init, at)) return true;
      return false;
    case Predicate::Kind::VSig:
      return w.signer && *w.signer == n.pk;
    case Predicate::Kind::VPreImg:
      return preimage_matches(n.slot == 1 ? w.pre1 : w.pre2, n.dig);
    case Predicate::Kind::VTime:
      return at >= init + n.timeout;
  }
  return false;
}

}  // namespace

PredicateAst make_htlc(PartyId pk_a, PartyId pk_b, std::int64_t T, const Digest& dig_a) {
  check_timeout(T);
  check_digest(dig_a);
  PredicateAst ast;
  ast.name = "HTLC";
  ast.paths.emplace_back(kHtlcA, Predicate::all({Predicate::preimg(1, dig_a), Predicate::sig(pk_a)}));
  ast.paths.emplace_back(kHtlcB, Predicate::all({Predicate::sig(pk_b), Predicate::after(T)}));
  return ast;
}

PredicateAst make_mh_dep(PartyId pk_a, PartyId pk_b, std::int64_t T, const Digest& dig_a, const Digest& dig_b) {
  check_timeout(T);
  check_digest(dig_a);
  check_digest(dig_b);
  if (dig_a == dig_b) throw std::invalid_argument("dig_a and dig_b must differ");
  PredicateAst ast;
  ast.name = "MH-Dep";
  ast.paths.emplace_back(kDepA, Predicate::all({Predicate::preimg(1, dig_a), Predicate::sig(pk_a)}));
  ast.paths.emplace_back(kDepB,
                         Predicate::all({Predicate::preimg(2, dig_b), Predicate::sig(pk_b), Predicate::after(T)}));
  ast.paths.emplace_back(kDepM, Predicate::all({Predicate::preimg(1, dig_a), Predicate::preimg(2, dig_b)}));
  return ast;
}

PredicateAst make_mh_col(PartyId pk_b, std::int64_t T, const Digest& dig_a, const Digest& dig_b) {
  check_timeout(T);
  check_digest(dig_a);
  check_digest(dig_b);
  if (dig_a == dig_b) throw std::invalid_argument("dig_a and dig_b must differ");
  PredicateAst ast;
  ast.name = "MH-Col";
  ast.paths.emplace_back(kColB, Predicate::all({Predicate::after(T), Predicate::sig(pk_b)}));
  ast.paths.emplace_back(
      kColM, Predicate::all({Predicate::after(T), Predicate::preimg(1, dig_a), Predicate::preimg(2, dig_b)}));
  return ast;
}

PredicateAst make_constant_true() {
  PredicateAst ast;
  ast.name = "Funding";
  ast.paths.emplace_back("any", Predicate::all({}));
  return ast;
}

bool r_predicate(std::string_view path, PartyId party, bool wa, bool wb) {
  if (path == kDepA) return party.is_alice() && wa;
  if (path == kDepB) return party.is_bob() && wb;
  if (path == kDepM || path == kColM) return wa && wb;
  if (path == kColB) return party.is_bob();
  throw std::invalid_argument("unknown redeem path '" + std::string(path) + "'");
}

bool evaluate(const Predicate& node, const RedeemWitness& w, std::optional<std::int64_t> init_height,
              std::int64_t at_height) {
  if (!init_height) {
    if (has_vtime(node)) throw TimeUndefined("vTime evaluated before the contract is confirmed");
    return eval_node(node, w, 0, at_height);
  }
  return eval_node(node, w, *init_height, at_height);
}

bool evaluate(const PredicateAst& ast, const RedeemWitness& w, std::optional<std::int64_t> init_height,
              std::int64_t at_height) {
  const Predicate* node = ast.find(w.path);
  if (!node) throw std::invalid_argument("contract " + ast.name + " has no path '" + w.path + "'");
  return evaluate(*node, w, init_height, at_height);
}

std::optional<std::int64_t> earliest_valid_height(const PredicateAst& ast, const RedeemWitness& w,
                                                  std::int64_t init_height) {
  const Predicate* node = ast.find(w.path);
  if (!node) throw std::invalid_argument("contract " + ast.name + " has no path '" + w.path + "'");
  std::vector<std::int64_t> ts;
  collect_timeouts(*node, ts);
  std::vector<std::int64_t> candidates = {init_height};
  for (auto t : ts) candidates.push_back(init_height + t);
  std::sort(candidates.begin(), candidates.end());
  for (auto h : candidates)
    if (eval_node(*node, w, init_height, h)) return h;
  return std::nullopt;
}

std::optional<std::string> select_path(const PredicateAst& ast, const RedeemWitness& w) {
  // digests per slot, taken from the contract itself
  std::set<int> valid;
  for (const auto& [name, node] : ast.paths) {
    std::vector<const Predicate*> stack = {&node};
    while (!stack.empty()) {
      const Predicate* n = stack.back();
      stack.pop_back();
      if (n->kind == Predicate::Kind::VPreImg && preimage_matches(n->slot == 1 ? w.pre1 : w.pre2, n->dig))
        valid.insert(n->slot);
      for (const auto& c : n->children) stack.push_back(&c);
    }
  }
  for (const auto& [name, node] : ast.paths) {
    std::set<int> slots;
    collect_slots(node, slots);
    if (slots == valid) return name;
  }
  return std::nullopt;
}

bool evaluate_selected(const PredicateAst& ast, RedeemWitness w, std::optional<std::int64_t> init_height,
                       std::int64_t at_height) {
  auto p = select_path(ast, w);
  if (!p) return false;
  w.path = *p;
  return evaluate(ast, w, init_height, at_height);
}

std::optional<Digest> slot_digest(const PredicateAst& ast, int slot) {
  for (const auto& [name, node] : ast.paths) {
    std::vector<const Predicate*> stack = {&node};
    while (!stack.empty()) {
      const Predicate* n = stack.back();
      stack.pop_back();
      if (n->kind == Predicate::Kind::VPreImg && n->slot == slot) return n->dig;
      for (const auto& c : n->children) stack.push_back(&c);
    }
  }
  return std::nullopt;
}

std::string serialize(const Predicate& n) {
  std::ostringstream os;
  switch (n.kind) {
    case Predicate::Kind::And:
    case Predicate::Kind::Or: {
      os << (n.kind == Predicate::Kind::And ? "and(" : "or(");
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) os << ",";
        os << serialize(n.children[i]);
      }
      os << ")";
      break;
    }
    case Predicate::Kind::VSig:
      os << "sig(" << to_string(n.pk) << ")";
      break;
    case Predicate::Kind::VPreImg:
      os << "preimg(" << n.slot << ",0x" << to_hex(n.dig) << ")";
      break;
    case Predicate::Kind::VTime:
      os << "after(" << n.timeout << ")";
      break;
  }
  return os.str();
}

std::string serialize(const PredicateAst& ast) {
  std::ostringstream os;
  os << "contract " << ast.name << "\n";
  for (const auto& [name, node] : ast.paths) os << "path " << name << " = " << serialize(node) << "\n";
  return os.str();
}

}  // namespace madlab
