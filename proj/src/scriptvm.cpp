#include "madlab/scriptvm.hpp"

#include <array>
#include <sstream>

namespace madlab {

namespace {

struct OpName {
  Op op;
  const char* name;
};

constexpr std::array<OpName, 12> kOpNames = {{
    {Op::Op0, "OP_0"},
    {Op::Op1, "OP_1"},
    {Op::Hash160, "OP_HASH160"},
    {Op::Equal, "OP_EQUAL"},
    {Op::Swap, "OP_SWAP"},
    {Op::If, "OP_IF"},
    {Op::Else, "OP_ELSE"},
    {Op::EndIf, "OP_ENDIF"},
    {Op::CheckSig, "OP_CHECKSIG"},
    {Op::CheckSequenceVerify, "OP_CHECKSEQUENCEVERIFY"},
    {Op::Drop, "OP_DROP"},
    {Op::Verify, "OP_VERIFY"},
}};

ScriptToken op(Op o) { return ScriptToken{o, {}}; }
ScriptToken push(Bytes b) { return ScriptToken{Op::Push, std::move(b)}; }

std::optional<std::int64_t> decode_num(const Bytes& b) {
  if (b.empty()) return 0;
  if (b.size() > 8) return std::nullopt;
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < b.size(); ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  bool neg = b.back() & 0x80;
  if (neg) v &= ~(static_cast<std::uint64_t>(0x80) << (8 * (b.size() - 1)));
  auto s = static_cast<std::int64_t>(v);
  return neg ? -s : s;
}

ExecResult fail(std::string why) { return ExecResult{false, std::move(why)}; }

bool is_token(const Bytes& b, std::uint8_t kind) { return b.size() >= 2 && b[0] == kind; }

}  // namespace

Bytes party_tag(PartyId p) {
  switch (p.kind) {
    case PartyId::Kind::Alice: return {0x41};
    case PartyId::Kind::Bob: return {0x42};
    case PartyId::Kind::Miner: return {0x4D, static_cast<std::uint8_t>(p.index)};
    case PartyId::Kind::External: return {0x58};
  }
  return {};
}

Bytes pk_token(PartyId p) {
  Bytes b = {0x50};
  Bytes t = party_tag(p);
  b.insert(b.end(), t.begin(), t.end());
  return b;
}

Bytes sig_token(PartyId p) {
  Bytes b = {0x53};
  Bytes t = party_tag(p);
  b.insert(b.end(), t.begin(), t.end());
  return b;
}

Bytes encode_num(std::int64_t n) {
  Bytes out;
  if (n == 0) return out;
  bool neg = n < 0;
  std::uint64_t a = neg ? static_cast<std::uint64_t>(-(n + 1)) + 1 : static_cast<std::uint64_t>(n);
  while (a) {
    out.push_back(static_cast<std::uint8_t>(a & 0xff));
    a >>= 8;
  }
  if (out.back() & 0x80)
    out.push_back(neg ? 0x80 : 0x00);
  else if (neg)
    out.back() |= 0x80;
  return out;
}

bool cast_to_bool(const Bytes& b) {
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i] != 0) {
      // negative zero
      if (i == b.size() - 1 && b[i] == 0x80) return false;
      return true;
    }
  }
  return false;
}

ExecResult exec(const ScriptProgram& script, const WitnessStack& witness, const ExecContext& ctx) {
  std::vector<Bytes> st = witness.items;
  std::vector<bool> cond;  // one entry per open IF
  auto executing = [&] {
    for (bool c : cond)
      if (!c) return false;
    return true;
  };
  const Bytes kTrue = {1};

  for (std::size_t pc = 0; pc < script.ops.size(); ++pc) {
    const ScriptToken& t = script.ops[pc];
    std::string at = " at op " + std::to_string(pc);
    if (t.op == Op::If) {
      if (!executing()) {
        cond.push_back(false);
        continue;
      }
      if (st.empty()) return fail("stack underflow in OP_IF" + at);
      bool v = cast_to_bool(st.back());
      st.pop_back();
      cond.push_back(v);
      continue;
    }
    if (t.op == Op::Else) {
      if (cond.empty()) return fail("OP_ELSE without OP_IF" + at);
      // only flips when the enclosing levels execute
      bool outer = true;
      for (std::size_t i = 0; i + 1 < cond.size(); ++i) outer = outer && cond[i];
      if (outer) cond.back() = !cond.back();
      continue;
    }
    if (t.op == Op::EndIf) {
      if (cond.empty()) return fail("OP_ENDIF without OP_IF" + at);
      cond.pop_back();
      continue;
    }
    if (!executing()) continue;

    switch (t.op) {
      case Op::Push: st.push_back(t.data); break;
      case Op::Op0: st.emplace_back(); break;
      case Op::Op1: st.push_back(kTrue); break;
      case Op::Hash160: {
        if (st.empty()) return fail("stack underflow in OP_HASH160" + at);
        st.back() = ctx.hash_mode == HashMode::Bitcoin160 ? hash160(st.back()) : hash(st.back(), ctx.digest_bits);
        break;
      }
      case Op::Equal: {
        if (st.size() < 2) return fail("stack underflow in OP_EQUAL" + at);
        Bytes a = std::move(st.back());
        st.pop_back();
        Bytes b = std::move(st.back());
        st.pop_back();
        st.push_back(a == b ? kTrue : Bytes{});
        break;
      }
      case Op::Swap:
        if (st.size() < 2) return fail("stack underflow in OP_SWAP" + at);
        std::swap(st[st.size() - 1], st[st.size() - 2]);
        break;
      case Op::CheckSig: {
        if (st.size() < 2) return fail("stack underflow in OP_CHECKSIG" + at);
        Bytes pk = std::move(st.back());
        st.pop_back();
        Bytes sig = std::move(st.back());
        st.pop_back();
        bool ok = is_token(sig, 0x53) && is_token(pk, 0x50) &&
                  Bytes(sig.begin() + 1, sig.end()) == Bytes(pk.begin() + 1, pk.end()) &&
                  Bytes(sig.begin() + 1, sig.end()) == party_tag(ctx.signer);
        st.push_back(ok ? kTrue : Bytes{});
        break;
      }
      case Op::CheckSequenceVerify: {
        if (st.empty()) return fail("stack underflow in OP_CHECKSEQUENCEVERIFY" + at);
        auto n = decode_num(st.back());
        if (!n || *n < 0) return fail("bad sequence operand" + at);
        if (ctx.at_height - ctx.init_height < *n) return fail("relative timeout not reached" + at);
        break;
      }
      case Op::Drop:
        if (st.empty()) return fail("stack underflow in OP_DROP" + at);
        st.pop_back();
        break;
      case Op::Verify:
        if (st.empty()) return fail("stack underflow in OP_VERIFY" + at);
        if (!cast_to_bool(st.back())) return fail("OP_VERIFY on false" + at);
        st.pop_back();
        break;
      default: break;
    }
  }
  if (!cond.empty()) return fail("unbalanced OP_IF");
  if (st.size() != 1) return fail("final stack depth " + std::to_string(st.size()));
  if (!cast_to_bool(st.back())) return fail("final stack element is false");
  return ExecResult{true, {}};
}

Builtin parse_builtin(std::string_view name) {
  if (name == "mh-dep") return Builtin::MhDep;
  if (name == "mh-col") return Builtin::MhCol;
  if (name == "htlc") return Builtin::Htlc;
  throw std::invalid_argument("unknown builtin script '" + std::string(name) + "'");
}

std::string to_string(Builtin b) {
  switch (b) {
    case Builtin::MhDep: return "mh-dep";
    case Builtin::MhCol: return "mh-col";
    case Builtin::Htlc: return "htlc";
  }
  return "?";
}

int path_count(Builtin b) { return b == Builtin::MhDep ? 3 : 2; }

std::string path_name(Builtin b, int path) {
  if (path < 1 || path > path_count(b))
    throw std::invalid_argument(to_string(b) + " has no redeem path " + std::to_string(path));
  switch (b) {
    case Builtin::MhDep: return std::string(path == 1 ? kDepA : path == 2 ? kDepB : kDepM);
    case Builtin::MhCol: return std::string(path == 1 ? kColB : kColM);
    case Builtin::Htlc: return std::string(path == 1 ? kHtlcA : kHtlcB);
  }
  return {};
}

ScriptProgram builtin(Builtin b, const BuiltinParams& p) {
  ScriptProgram s;
  auto& o = s.ops;
  switch (b) {
    case Builtin::MhDep:
      o = {op(Op::Hash160), push(p.dig_a), op(Op::Equal), op(Op::Swap),  op(Op::Hash160),
           push(p.dig_b),   op(Op::Equal), op(Op::If),    op(Op::If),    op(Op::Op1),
           op(Op::Else),    push(encode_num(p.T)), op(Op::CheckSequenceVerify), op(Op::Drop),
           push(pk_token(p.pk_b)), op(Op::CheckSig), op(Op::EndIf), op(Op::Else), op(Op::Verify),
           push(pk_token(p.pk_a)), op(Op::CheckSig), op(Op::EndIf)};
      break;
    case Builtin::MhCol:
      o = {push(encode_num(p.T)), op(Op::CheckSequenceVerify), op(Op::Drop), op(Op::Hash160), push(p.dig_a),
           op(Op::Equal), op(Op::If), op(Op::Hash160), push(p.dig_b), op(Op::Equal), op(Op::Else),
           push(pk_token(p.pk_b)), op(Op::CheckSig), op(Op::EndIf)};
      break;
    case Builtin::Htlc:
      o = {op(Op::Hash160), push(p.dig_a), op(Op::Equal), op(Op::If), push(pk_token(p.pk_a)), op(Op::Else),
           push(encode_num(p.T)), op(Op::CheckSequenceVerify), op(Op::Drop), push(pk_token(p.pk_b)),
           op(Op::EndIf), op(Op::CheckSig)};
      break;
  }
  return s;
}

bool row_signed(Builtin b, int path) {
  switch (b) {
    case Builtin::MhDep: return path != 3;
    case Builtin::MhCol: return path == 1;
    case Builtin::Htlc: return true;
  }
  return false;
}

WitnessStack witness_row(Builtin b, int path, const Bytes& a, const Bytes& bv, PartyId signer) {
  path_name(b, path);  // range check
  WitnessStack w;
  switch (b) {
    case Builtin::MhDep:
      if (path == 3)
        w.items = {bv, a};
      else
        w.items = {sig_token(signer), bv, a};
      break;
    case Builtin::MhCol:
      if (path == 1)
        w.items = {sig_token(signer), a};
      else
        w.items = {bv, a};
      break;
    case Builtin::Htlc:
      w.items = {sig_token(signer), a};
      break;
  }
  return w;
}

WitnessStack witness_for(Builtin b, int path, const Secrets& s, PartyId signer) {
  bool need_a = false;
  bool need_b = false;
  switch (b) {
    case Builtin::MhDep:
      need_a = path == 1 || path == 3;
      need_b = path == 2 || path == 3;
      break;
    case Builtin::MhCol:
      need_a = need_b = path == 2;
      break;
    case Builtin::Htlc:
      need_a = path == 1;
      break;
  }
  path_name(b, path);
  if (need_a && !s.pre_a) throw MissingSecret("pre_a");
  if (need_b && !s.pre_b) throw MissingSecret("pre_b");
  return witness_row(b, path, need_a ? *s.pre_a : Bytes{}, need_b ? *s.pre_b : Bytes{}, signer);
}

std::string disassemble(const ScriptProgram& p) {
  std::ostringstream os;
  for (std::size_t i = 0; i < p.ops.size(); ++i) {
    if (i) os << ' ';
    const auto& t = p.ops[i];
    if (t.op == Op::Push) {
      os << "0x" << to_hex(t.data);
      continue;
    }
    for (const auto& n : kOpNames)
      if (n.op == t.op) os << n.name;
  }
  return os.str();
}

ScriptProgram assemble(std::string_view text) {
  ScriptProgram p;
  std::istringstream is{std::string(text)};
  std::string word;
  while (is >> word) {
    if (word.rfind("0x", 0) == 0) {
      p.ops.push_back(push(from_hex(std::string_view(word).substr(2))));
      continue;
    }
    bool found = false;
    for (const auto& n : kOpNames) {
      if (word == n.name) {
        p.ops.push_back(op(n.op));
        found = true;
        break;
      }
    }
    if (!found) throw std::invalid_argument("unknown script token '" + word + "'");
  }
  return p;
}

namespace {

bool has_sig_leaf(const Predicate& n) {
  if (n.kind == Predicate::Kind::VSig) return true;
  for (const auto& c : n.children)
    if (has_sig_leaf(c)) return true;
  return false;
}

bool row_has_b(Builtin b, int path) {
  return b == Builtin::MhDep || (b == Builtin::MhCol && path == 2);
}

}  // namespace

DifferentialReport differential_check(Builtin b, std::uint64_t trials, std::mt19937_64& rng,
                                      const DifferentialOptions& opt) {
  if (trials < 1) throw std::invalid_argument("trials must be at least 1");
  const std::int64_t T = opt.T;
  const std::int64_t init = 1;
  Preimage pre_a = random_preimage(rng, opt.digest_bits);
  Preimage pre_b = random_preimage(rng, opt.digest_bits);
  while (pre_b == pre_a) pre_b = random_preimage(rng, opt.digest_bits);

  PartyId A = PartyId::alice();
  PartyId B = PartyId::bob();
  Digest da = hash(pre_a, opt.digest_bits);
  Digest db = hash(pre_b, opt.digest_bits);
  PredicateAst ast = b == Builtin::MhDep   ? make_mh_dep(A, B, T, da, db)
                     : b == Builtin::MhCol ? make_mh_col(B, T, da, db)
                                           : make_htlc(A, B, T, da);

  BuiltinParams bp;
  bp.T = T;
  bp.dig_a = opt.hash_mode == HashMode::Bitcoin160 ? hash160(pre_a) : da;
  bp.dig_b = opt.hash_mode == HashMode::Bitcoin160 ? hash160(pre_b) : db;
  ScriptProgram prog = opt.override_script ? *opt.override_script : builtin(b, bp);

  const std::array<PartyId, 4> signers = {A, B, PartyId::miner(1), PartyId::external()};
  const char* kinds[] = {"correct", "wrong", "empty"};

  DifferentialReport rep;
  rep.name = to_string(b);
  rep.trials = trials;
  for (std::uint64_t t = 0; t < trials; ++t) {
    int path = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(path_count(b)));
    PartyId signer = signers[rng() % signers.size()];
    int ka = static_cast<int>(rng() % 3);
    int kb = static_cast<int>(rng() % 3);
    std::int64_t off = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(2 * T + 1));
    bool extra = rng() % 10 == 0;
    auto value = [&](int kind, const Preimage& good) -> Bytes {
      if (kind == 0) return good;
      if (kind == 1) {
        Bytes w = random_preimage(rng, opt.digest_bits);
        while (w == good) w = random_preimage(rng, opt.digest_bits);
        return w;
      }
      return {};
    };
    Bytes a = value(ka, pre_a);
    Bytes bv = row_has_b(b, path) ? value(kb, pre_b) : Bytes{};
    if (!row_has_b(b, path)) kb = 2;

    WitnessStack ws = witness_row(b, path, a, bv, signer);
    if (extra) ws.items.push_back(random_preimage(rng, 64));
    ExecContext ctx;
    ctx.init_height = init;
    ctx.at_height = init + off;
    ctx.signer = signer;
    ctx.hash_mode = opt.hash_mode;
    ctx.digest_bits = opt.digest_bits;
    ExecResult vm = exec(prog, ws, ctx);

    RedeemWitness rw;
    if (!a.empty()) rw.pre1 = a;
    if (!bv.empty()) rw.pre2 = bv;
    if (row_signed(b, path)) rw.signer = signer;
    bool oracle = false;
    if (!extra) {
      auto sel = select_path(ast, rw);
      // a signature the chosen path does not consume is a surplus stack item
      if (sel && !(rw.signer && !has_sig_leaf(*ast.find(*sel)))) {
        rw.path = *sel;
        oracle = evaluate(ast, rw, init, init + off);
      }
    }

    if (vm.ok) ++rep.vm_true;
    if (vm.ok != oracle) {
      ++rep.counterexample_count;
      if (rep.counterexamples.size() < 20)
        rep.counterexamples.push_back(
            Counterexample{path, to_string(signer), kinds[ka], kinds[kb], off, extra, vm.ok, oracle, vm.reason});
    }
  }
  return rep;
}

}  // namespace madlab
