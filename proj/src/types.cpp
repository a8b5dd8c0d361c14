#include "madlab/types.hpp"

#include <stdexcept>

#include <openssl/ripemd.h>
#include <openssl/sha.h>

namespace madlab {

Digest sha256(const Bytes& data) {
  Digest out(SHA256_DIGEST_LENGTH);
  SHA256(data.data(), data.size(), out.data());
  return out;
}

Digest ripemd160(const Bytes& data) {
  Digest out(RIPEMD160_DIGEST_LENGTH);
  RIPEMD160(data.data(), data.size(), out.data());
  return out;
}

Digest hash160(const Bytes& data) { return ripemd160(sha256(data)); }

Digest hash(const Bytes& data, unsigned bits) {
  if (bits == 0 || bits % 8 != 0 || bits > 256)
    throw std::invalid_argument("digest length must be a multiple of 8 in [8, 256]");
  Digest d = sha256(data);
  d.resize(bits / 8);
  return d;
}

std::string to_hex(const Bytes& b) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(b.size() * 2);
  for (auto c : b) {
    s.push_back(digits[c >> 4]);
    s.push_back(digits[c & 0xf]);
  }
  return s;
}

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw std::invalid_argument("odd-length hex string");
  auto nib = [&](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("bad hex digit in '" + std::string(hex) + "'");
  };
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(nib(hex[2 * i]) << 4 | nib(hex[2 * i + 1]));
  return out;
}

Preimage random_preimage(std::mt19937_64& rng, unsigned bits) {
  Preimage p((bits + 7) / 8);
  for (std::size_t i = 0; i < p.size(); i += 8) {
    std::uint64_t w = rng();
    for (std::size_t j = 0; j < 8 && i + j < p.size(); ++j) p[i + j] = static_cast<std::uint8_t>(w >> (8 * j));
  }
  return p;
}

std::string to_string(PartyId p) {
  switch (p.kind) {
    case PartyId::Kind::Alice: return "A";
    case PartyId::Kind::Bob: return "B";
    case PartyId::Kind::Miner: return "M" + std::to_string(p.index);
    case PartyId::Kind::External: return "X";
  }
  return "?";
}

PartyId parse_party(std::string_view s) {
  if (s == "A") return PartyId::alice();
  if (s == "B") return PartyId::bob();
  if (s == "X") return PartyId::external();
  if (s.size() >= 2 && s[0] == 'M') {
    int i = 0;
    for (char c : s.substr(1)) {
      if (c < '0' || c > '9') throw std::invalid_argument("bad party id '" + std::string(s) + "'");
      i = i * 10 + (c - '0');
    }
    if (i >= 1) return PartyId::miner(i);
  }
  throw std::invalid_argument("bad party id '" + std::string(s) + "'");
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  // splitmix64 over a mixed input
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace madlab
