#pragma once

#include <compare>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace madlab {

using Bytes = std::vector<std::uint8_t>;
using Preimage = Bytes;
using Digest = Bytes;

// Smallest token quantum. Amounts are non-negative by convention; the
// External account is the one place a balance may dip below zero.
using TokenAmount = std::int64_t;

constexpr unsigned kDefaultDigestBits = 256;

// SHA-256 truncated to `bits` (a multiple of 8, at most 256).
Digest hash(const Bytes& data, unsigned bits = kDefaultDigestBits);
Digest sha256(const Bytes& data);
Digest ripemd160(const Bytes& data);
// RIPEMD160(SHA256(x)), the real OP_HASH160.
Digest hash160(const Bytes& data);

std::string to_hex(const Bytes& b);
Bytes from_hex(std::string_view hex);  // throws std::invalid_argument

// mu-bit preimage drawn from rng.
Preimage random_preimage(std::mt19937_64& rng, unsigned bits = kDefaultDigestBits);

struct PartyId {
  enum class Kind : std::uint8_t { Alice, Bob, Miner, External };
  Kind kind = Kind::External;
  int index = 0;  // miners are 1-based

  static PartyId alice() { return {Kind::Alice, 0}; }
  static PartyId bob() { return {Kind::Bob, 0}; }
  static PartyId miner(int i) { return {Kind::Miner, i}; }
  static PartyId external() { return {Kind::External, 0}; }

  bool is_alice() const { return kind == Kind::Alice; }
  bool is_bob() const { return kind == Kind::Bob; }
  bool is_miner() const { return kind == Kind::Miner; }

  auto operator<=>(const PartyId&) const = default;
};

// "A", "B", "M3", "X".
std::string to_string(PartyId p);
PartyId parse_party(std::string_view s);  // throws std::invalid_argument

// Derives an independent 64-bit stream seed for `stream` from `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace madlab
