#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "madlab/contracts.hpp"
#include "madlab/types.hpp"

namespace madlab {

enum class Op : std::uint8_t {
  Push,
  Op0,
  Op1,
  Hash160,
  Equal,
  Swap,
  If,
  Else,
  EndIf,
  CheckSig,
  CheckSequenceVerify,
  Drop,
  Verify,
};

struct ScriptToken {
  Op op = Op::Push;
  Bytes data;  // Push only

  bool operator==(const ScriptToken&) const = default;
};

struct ScriptProgram {
  std::vector<ScriptToken> ops;
  bool operator==(const ScriptProgram&) const = default;
};

// Bottom to top, as listed in the script input tables.
struct WitnessStack {
  std::vector<Bytes> items;
  bool operator==(const WitnessStack&) const = default;
};

enum class HashMode { Ledger, Bitcoin160 };

struct ExecContext {
  std::int64_t init_height = 0;
  std::int64_t at_height = 0;
  PartyId signer;
  HashMode hash_mode = HashMode::Ledger;
  unsigned digest_bits = kDefaultDigestBits;  // Ledger mode only
};

struct ExecResult {
  bool ok = false;
  std::string reason;  // empty when ok
};

ExecResult exec(const ScriptProgram& script, const WitnessStack& witness, const ExecContext& ctx);

// Tagged identity tokens: pk = 'P' + party, sig = 'S' + party.
Bytes party_tag(PartyId p);
Bytes pk_token(PartyId p);
Bytes sig_token(PartyId p);

Bytes encode_num(std::int64_t n);  // minimal script-number encoding
bool cast_to_bool(const Bytes& b);

enum class Builtin { MhDep, MhCol, Htlc };
Builtin parse_builtin(std::string_view name);  // "mh-dep", "mh-col", "htlc"
std::string to_string(Builtin b);
int path_count(Builtin b);
// Contract path named by a 1-based script row: mh-dep 1/2/3 = dep-A/dep-B/dep-M,
// mh-col 1/2 = col-B/col-M, htlc 1/2 = htlc-A/htlc-B.
std::string path_name(Builtin b, int path);

struct BuiltinParams {
  PartyId pk_a = PartyId::alice();
  PartyId pk_b = PartyId::bob();
  std::int64_t T = 1;
  Digest dig_a;
  Digest dig_b;  // unused by htlc
};

ScriptProgram builtin(Builtin b, const BuiltinParams& p);

class MissingSecret : public std::invalid_argument {
 public:
  explicit MissingSecret(std::string slot)
      : std::invalid_argument("missing secret " + slot), slot_(std::move(slot)) {}
  const std::string& slot() const { return slot_; }

 private:
  std::string slot_;
};

struct Secrets {
  std::optional<Preimage> pre_a;
  std::optional<Preimage> pre_b;
};

// The input row for (b, path); throws MissingSecret when a needed preimage is absent.
WitnessStack witness_for(Builtin b, int path, const Secrets& secrets, PartyId signer);
// Same layout with arbitrary slot bytes (empty = OP_0).
WitnessStack witness_row(Builtin b, int path, const Bytes& a, const Bytes& b_value, PartyId signer);
// Whether row `path` carries a signature item.
bool row_signed(Builtin b, int path);

// Text form: whitespace-separated opcode names, pushes as 0x-hex.
std::string disassemble(const ScriptProgram& p);
ScriptProgram assemble(std::string_view text);  // throws std::invalid_argument

struct Counterexample {
  int path = 0;
  std::string signer;
  std::string slot_a;  // correct | wrong | empty
  std::string slot_b;
  std::int64_t height_offset = 0;
  bool extra_item = false;
  bool vm = false;
  bool oracle = false;
  std::string vm_reason;
};

struct DifferentialReport {
  std::string name;
  std::uint64_t trials = 0;
  std::uint64_t counterexample_count = 0;
  std::uint64_t vm_true = 0;
  std::vector<Counterexample> counterexamples;  // first few
};

struct DifferentialOptions {
  std::int64_t T = 3;
  HashMode hash_mode = HashMode::Ledger;
  unsigned digest_bits = kDefaultDigestBits;
  // Replaces the builtin script (mutation testing).
  std::optional<ScriptProgram> override_script;
};

DifferentialReport differential_check(Builtin b, std::uint64_t trials, std::mt19937_64& rng,
                                      const DifferentialOptions& opt = {});

}  // namespace madlab
