#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "madlab/types.hpp"

namespace madlab {

// Redeem path names used by the three contracts.
inline constexpr std::string_view kDepA = "dep-A";
inline constexpr std::string_view kDepB = "dep-B";
inline constexpr std::string_view kDepM = "dep-M";
inline constexpr std::string_view kColB = "col-B";
inline constexpr std::string_view kColM = "col-M";
inline constexpr std::string_view kHtlcA = "htlc-A";
inline constexpr std::string_view kHtlcB = "htlc-B";

// The five MAD-HTLC paths in canonical order.
const std::vector<std::string>& mad_paths();

struct Predicate {
  enum class Kind : std::uint8_t { And, Or, VSig, VPreImg, VTime };

  Kind kind = Kind::And;
  std::vector<Predicate> children;
  PartyId pk{};
  int slot = 0;
  Digest dig;
  std::int64_t timeout = 0;

  static Predicate all(std::vector<Predicate> c);
  static Predicate any(std::vector<Predicate> c);
  static Predicate sig(PartyId pk);
  static Predicate preimg(int slot, Digest dig);
  static Predicate after(std::int64_t t);
};

struct PredicateAst {
  std::string name;
  std::vector<std::pair<std::string, Predicate>> paths;

  const Predicate* find(std::string_view path) const;
  Predicate root() const;  // Or over all paths
};

struct RedeemWitness {
  std::string path;
  std::optional<Preimage> pre1;
  std::optional<Preimage> pre2;
  std::optional<PartyId> signer;  // identity-model signature; empty = unsigned
};

// vTime evaluated against a contract whose initiating block does not exist.
class TimeUndefined : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

PredicateAst make_htlc(PartyId pk_a, PartyId pk_b, std::int64_t T, const Digest& dig_a);
PredicateAst make_mh_dep(PartyId pk_a, PartyId pk_b, std::int64_t T, const Digest& dig_a, const Digest& dig_b);
PredicateAst make_mh_col(PartyId pk_b, std::int64_t T, const Digest& dig_a, const Digest& dig_b);
// Single path "any" with an empty conjunction; used for funding coins.
PredicateAst make_constant_true();

// Relaxed predicate over knowledge indicators. Throws std::invalid_argument
// for a path outside the five MAD-HTLC paths.
bool r_predicate(std::string_view path, PartyId party, bool wa, bool wb);

bool evaluate(const Predicate& node, const RedeemWitness& w, std::optional<std::int64_t> init_height,
              std::int64_t at_height);
// Evaluates the subtree named by w.path. Throws std::invalid_argument when
// the path does not exist and TimeUndefined as described above.
bool evaluate(const PredicateAst& ast, const RedeemWitness& w, std::optional<std::int64_t> init_height,
              std::int64_t at_height);

// Smallest height at which the named path would hold, if raising the height
// alone can make it hold. Requires a confirmed init height.
std::optional<std::int64_t> earliest_valid_height(const PredicateAst& ast, const RedeemWitness& w,
                                                  std::int64_t init_height);

// The path whose preimage slots are exactly the slots of `w` carrying a
// preimage that matches the digest; nullopt if no path has that slot set.
std::optional<std::string> select_path(const PredicateAst& ast, const RedeemWitness& w);
// evaluate() on the path chosen by select_path, false if none.
bool evaluate_selected(const PredicateAst& ast, RedeemWitness w, std::optional<std::int64_t> init_height,
                       std::int64_t at_height);

// Digest bound to a preimage slot anywhere in the contract, if any.
std::optional<Digest> slot_digest(const PredicateAst& ast, int slot);

std::string serialize(const Predicate& node);
// One line per path in declaration order:
//   contract MH-Dep
//   path dep-A = and(preimg(1,0x..),sig(A))
std::string serialize(const PredicateAst& ast);

}  // namespace madlab
