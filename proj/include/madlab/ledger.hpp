#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "madlab/contracts.hpp"
#include "madlab/rational.hpp"
#include "madlab/types.hpp"

namespace madlab {

struct Contract {
  std::string id;
  TokenAmount amount = 0;
  PredicateAst predicate;
  std::optional<std::int64_t> init_height;
};

struct TxInput {
  std::string contract_id;
  RedeemWitness witness;
};

// fee = sum(inputs) + account_debit - sum(outputs) - payout.
// account_debit draws from the creator's balance (unrelated transactions
// are funded by the External account); payout credits the creator.
struct Transaction {
  std::string id;
  PartyId creator;
  std::vector<TxInput> inputs;
  TokenAmount account_debit = 0;
  std::vector<Contract> outputs;
  TokenAmount payout = 0;
  TokenAmount fee = 0;
};

struct Block {
  std::int64_t height = 0;
  PartyId miner;
  std::optional<Transaction> tx;
};

struct ContractRecord {
  Contract contract;
  std::optional<std::string> redeemed_by;
  std::optional<std::int64_t> redeemed_at;
};

class UnknownContract : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

struct Verdict {
  enum class Kind { Valid, Conflicting, PredicateFalse, TimeLocked, Overspend };
  Kind kind = Kind::Valid;
  std::string conflicting_tx;     // Conflicting
  std::string path;               // PredicateFalse
  std::int64_t earliest = 0;      // TimeLocked
  std::string detail;

  bool valid() const { return kind == Kind::Valid; }
};

std::string to_string(const Verdict& v);

class Chain {
 public:
  std::int64_t height() const { return static_cast<std::int64_t>(blocks_.size()); }
  std::int64_t next_height() const { return height() + 1; }
  const std::vector<Block>& blocks() const { return blocks_; }

  // Pre-chain funding, paid from the External account; init height 0.
  void fund(Contract c);

  const ContractRecord& contract(const std::string& id) const;  // throws UnknownContract
  bool has_contract(const std::string& id) const { return contracts_.count(id) != 0; }
  const std::map<std::string, ContractRecord>& contracts() const { return contracts_; }

  // Appends block next_height(). A present tx must validate; throws
  // std::logic_error otherwise. The fee goes to the miner.
  void append(PartyId miner, const std::optional<Transaction>& tx);

  TokenAmount balance(PartyId p) const;
  const std::map<PartyId, TokenAmount>& balances() const { return balances_; }
  // Sum of balances plus unredeemed contract amounts.
  TokenAmount total_value() const;

 private:
  std::vector<Block> blocks_;
  std::map<std::string, ContractRecord> contracts_;
  std::map<PartyId, TokenAmount> balances_;
};

Verdict validate_transaction(const Transaction& tx, const Chain& chain, std::int64_t at_height);

// Unrelated transactions paying exactly f, ids "unrelated-000001", ...
class BaseFeeStream {
 public:
  explicit BaseFeeStream(TokenAmount f);  // f must be positive
  Transaction next();
  TokenAmount fee() const { return f_; }

 private:
  TokenAmount f_;
  std::uint64_t counter_ = 0;
};

class Mempool {
 public:
  Mempool() = default;
  explicit Mempool(BaseFeeStream stream);

  // Adds tx and records the preimages its witnesses reveal.
  void publish(const Transaction& tx, const Chain& chain);
  bool contains(const std::string& id) const { return txs_.count(id) != 0; }
  const std::map<std::string, Transaction>& txs() const { return txs_; }
  std::vector<const Transaction*> includable(const Chain& chain, std::int64_t at_height) const;

  // Drops tx and anything now conflicting with the chain, then tops up the
  // base-fee stream so an unrelated transaction is always pending.
  void on_block(const Chain& chain, const std::optional<Transaction>& included);

  const std::set<Preimage>& revealed() const { return revealed_; }

 private:
  void replenish();

  std::map<std::string, Transaction> txs_;
  std::set<Preimage> revealed_;
  std::optional<BaseFeeStream> stream_;
};

struct MinerPopulation {
  std::vector<Rational> powers;

  void validate() const;  // throws std::invalid_argument
  std::size_t size() const { return powers.size(); }
  Rational lambda_min() const;
};

// Draws a miner index in [0, n) with probability lambda_i. Exact when the
// common denominator fits in 64 bits.
class MinerSampler {
 public:
  explicit MinerSampler(const MinerPopulation& pop);
  std::size_t sample(std::mt19937_64& rng) const;
  bool exact() const { return exact_; }

 private:
  bool exact_ = true;
  std::uint64_t denom_ = 1;
  std::vector<std::uint64_t> cum_;
  std::vector<double> cumd_;
};

// Picks a transaction for the block at `height`, possibly self-created.
using SelectionPolicy =
    std::function<std::optional<Transaction>(const Chain&, const Mempool&, std::int64_t height, PartyId miner)>;

// Highest fee among includable transactions, ties by lexicographic id.
SelectionPolicy myopic_policy();

struct RoundOutcome {
  std::int64_t height = 0;
  PartyId miner;
  std::optional<std::string> tx_id;
  TokenAmount fee = 0;
  std::vector<std::string> redeemed_contracts;
};

RoundOutcome advance_round(Chain& chain, Mempool& mempool, const MinerSampler& sampler,
                           const std::vector<SelectionPolicy>& policy_of, std::mt19937_64& rng);

// One trace-v1 record.
nlohmann::json trace_record(const RoundOutcome& r);

}  // namespace madlab
