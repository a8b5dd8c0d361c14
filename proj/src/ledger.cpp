#include "madlab/ledger.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

namespace madlab {

std::string to_string(const Verdict& v) {
  switch (v.kind) {
    case Verdict::Kind::Valid: return "Valid";
    case Verdict::Kind::Conflicting: return "Conflicting(" + v.conflicting_tx + ")";
    case Verdict::Kind::PredicateFalse: return "PredicateFalse(" + v.path + ")";
    case Verdict::Kind::TimeLocked: return "TimeLocked(" + std::to_string(v.earliest) + ")";
    case Verdict::Kind::Overspend: return "Overspend(" + v.detail + ")";
  }
  return "?";
}

void Chain::fund(Contract c) {
  if (c.amount <= 0) throw std::invalid_argument("contract amount must be positive");
  if (contracts_.count(c.id)) throw std::invalid_argument("duplicate contract id " + c.id);
  balances_[PartyId::external()] -= c.amount;
  c.init_height = 0;
  std::string id = c.id;
  contracts_.emplace(id, ContractRecord{std::move(c), std::nullopt, std::nullopt});
}

const ContractRecord& Chain::contract(const std::string& id) const {
  auto it = contracts_.find(id);
  if (it == contracts_.end()) throw UnknownContract("unknown contract id " + id);
  return it->second;
}

TokenAmount Chain::balance(PartyId p) const {
  auto it = balances_.find(p);
  return it == balances_.end() ? 0 : it->second;
}

TokenAmount Chain::total_value() const {
  TokenAmount t = 0;
  for (const auto& [p, b] : balances_) t += b;
  for (const auto& [id, r] : contracts_)
    if (!r.redeemed_by) t += r.contract.amount;
  return t;
}

void Chain::append(PartyId miner, const std::optional<Transaction>& tx) {
  std::int64_t h = next_height();
  if (tx) {
    Verdict v = validate_transaction(*tx, *this, h);
    if (!v.valid()) throw std::logic_error("block " + std::to_string(h) + ": " + tx->id + " is " + to_string(v));
    for (const auto& in : tx->inputs) {
      auto& r = contracts_.at(in.contract_id);
      r.redeemed_by = tx->id;
      r.redeemed_at = h;
    }
    balances_[tx->creator] -= tx->account_debit;
    balances_[tx->creator] += tx->payout;
    for (const auto& out : tx->outputs) {
      Contract c = out;
      c.init_height = h;
      contracts_.emplace(c.id, ContractRecord{c, std::nullopt, std::nullopt});
    }
    balances_[miner] += tx->fee;
  }
  blocks_.push_back(Block{h, miner, tx});
}

Verdict validate_transaction(const Transaction& tx, const Chain& chain, std::int64_t at_height) {
  Verdict v;
  TokenAmount in_sum = 0;
  std::set<std::string> seen;
  for (const auto& in : tx.inputs) {
    const ContractRecord& r = chain.contract(in.contract_id);
    in_sum += r.contract.amount;
    if (r.redeemed_by) {
      v.kind = Verdict::Kind::Conflicting;
      v.conflicting_tx = *r.redeemed_by;
      return v;
    }
    if (!seen.insert(in.contract_id).second) {
      v.kind = Verdict::Kind::Conflicting;
      v.conflicting_tx = tx.id;
      v.detail = "input listed twice";
      return v;
    }
  }

  for (const auto& in : tx.inputs) {
    const Contract& c = chain.contract(in.contract_id).contract;
    RedeemWitness w = in.witness;
    w.signer = tx.creator;  // identity signature model
    if (!c.predicate.find(w.path)) {
      v.kind = Verdict::Kind::PredicateFalse;
      v.path = w.path;
      v.detail = "no such path";
      return v;
    }
    bool ok = false;
    try {
      ok = evaluate(c.predicate, w, c.init_height, at_height);
    } catch (const TimeUndefined&) {
      v.kind = Verdict::Kind::PredicateFalse;
      v.path = w.path;
      v.detail = "contract not confirmed";
      return v;
    }
    if (!ok) {
      std::optional<std::int64_t> e;
      if (c.init_height) e = earliest_valid_height(c.predicate, w, *c.init_height);
      if (e && *e > at_height) {
        v.kind = Verdict::Kind::TimeLocked;
        v.earliest = *e;
      } else {
        v.kind = Verdict::Kind::PredicateFalse;
        v.path = w.path;
      }
      return v;
    }
  }

  TokenAmount out_sum = 0;
  for (const auto& o : tx.outputs) {
    if (o.amount <= 0) {
      v.kind = Verdict::Kind::Overspend;
      v.detail = "non-positive output";
      return v;
    }
    out_sum += o.amount;
  }
  if (tx.account_debit < 0 || tx.payout < 0) {
    v.kind = Verdict::Kind::Overspend;
    v.detail = "negative debit or payout";
    return v;
  }
  if (tx.creator != PartyId::external() && tx.account_debit > chain.balance(tx.creator)) {
    v.kind = Verdict::Kind::Overspend;
    v.detail = "debit exceeds balance";
    return v;
  }
  TokenAmount fee = in_sum + tx.account_debit - out_sum - tx.payout;
  if (fee < 0 || fee != tx.fee) {
    v.kind = Verdict::Kind::Overspend;
    v.detail = "fee " + std::to_string(tx.fee) + " but balance leaves " + std::to_string(fee);
    return v;
  }
  return v;
}

BaseFeeStream::BaseFeeStream(TokenAmount f) : f_(f) {
  if (f <= 0) throw std::invalid_argument("base fee f must be positive");
}

Transaction BaseFeeStream::next() {
  char buf[32];
  std::snprintf(buf, sizeof buf, "unrelated-%06llu", static_cast<unsigned long long>(++counter_));
  Transaction tx;
  tx.id = buf;
  tx.creator = PartyId::external();
  tx.account_debit = f_;
  tx.fee = f_;
  return tx;
}

Mempool::Mempool(BaseFeeStream stream) : stream_(std::move(stream)) { replenish(); }

void Mempool::replenish() {
  if (!stream_) return;
  for (const auto& [id, tx] : txs_)
    if (tx.creator == PartyId::external() && tx.inputs.empty()) return;
  Transaction tx = stream_->next();
  txs_.emplace(tx.id, tx);
}

void Mempool::publish(const Transaction& tx, const Chain& chain) {
  for (const auto& in : tx.inputs) {
    if (!chain.has_contract(in.contract_id)) continue;
    const auto& ast = chain.contract(in.contract_id).contract.predicate;
    for (int slot : {1, 2}) {
      const auto& pre = slot == 1 ? in.witness.pre1 : in.witness.pre2;
      auto dig = slot_digest(ast, slot);
      if (pre && dig && hash(*pre, static_cast<unsigned>(dig->size() * 8)) == *dig) revealed_.insert(*pre);
    }
  }
  txs_[tx.id] = tx;
}

std::vector<const Transaction*> Mempool::includable(const Chain& chain, std::int64_t at_height) const {
  std::vector<const Transaction*> out;
  for (const auto& [id, tx] : txs_) {
    bool known = std::all_of(tx.inputs.begin(), tx.inputs.end(),
                             [&](const TxInput& in) { return chain.has_contract(in.contract_id); });
    if (known && validate_transaction(tx, chain, at_height).valid()) out.push_back(&tx);
  }
  return out;
}

void Mempool::on_block(const Chain& chain, const std::optional<Transaction>& included) {
  if (included) txs_.erase(included->id);
  for (auto it = txs_.begin(); it != txs_.end();) {
    bool dead = false;
    for (const auto& in : it->second.inputs)
      if (chain.has_contract(in.contract_id) && chain.contract(in.contract_id).redeemed_by) dead = true;
    it = dead ? txs_.erase(it) : std::next(it);
  }
  replenish();
}

void MinerPopulation::validate() const {
  if (powers.empty()) throw std::invalid_argument("miner population is empty");
  Rational sum = 0;
  for (const auto& p : powers) {
    if (p <= 0) throw std::invalid_argument("every mining power must be positive");
    sum += p;
  }
  if (sum != 1) throw std::invalid_argument("mining powers sum to " + to_string(sum) + ", not 1");
}

Rational MinerPopulation::lambda_min() const {
  if (powers.empty()) throw std::invalid_argument("miner population is empty");
  return *std::min_element(powers.begin(), powers.end());
}

MinerSampler::MinerSampler(const MinerPopulation& pop) {
  pop.validate();
  BigInt d = 1;
  for (const auto& p : pop.powers) d = boost::multiprecision::lcm(d, BigInt(boost::multiprecision::denominator(p)));
  exact_ = d <= BigInt(std::numeric_limits<std::uint64_t>::max());
  double acc = 0;
  BigInt cum = 0;
  for (const auto& p : pop.powers) {
    acc += to_double(p);
    cumd_.push_back(acc);
    if (exact_) {
      cum += boost::multiprecision::numerator(p) * (d / boost::multiprecision::denominator(p));
      cum_.push_back(cum.convert_to<std::uint64_t>());
    }
  }
  if (exact_) denom_ = d.convert_to<std::uint64_t>();
}

std::size_t MinerSampler::sample(std::mt19937_64& rng) const {
  if (exact_) {
    // rejection sampling keeps the draw unbiased
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % denom_;
    std::uint64_t x;
    do x = rng();
    while (x >= limit && limit != 0);
    x %= denom_;
    for (std::size_t i = 0; i < cum_.size(); ++i)
      if (x < cum_[i]) return i;
    return cum_.size() - 1;
  }
  double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  for (std::size_t i = 0; i < cumd_.size(); ++i)
    if (u < cumd_[i]) return i;
  return cumd_.size() - 1;
}

SelectionPolicy myopic_policy() {
  return [](const Chain& chain, const Mempool& mp, std::int64_t h, PartyId) -> std::optional<Transaction> {
    const Transaction* best = nullptr;
    for (const Transaction* tx : mp.includable(chain, h))  // id order
      if (!best || tx->fee > best->fee) best = tx;
    if (!best) return std::nullopt;
    return *best;
  };
}

RoundOutcome advance_round(Chain& chain, Mempool& mempool, const MinerSampler& sampler,
                           const std::vector<SelectionPolicy>& policy_of, std::mt19937_64& rng) {
  std::size_t i = sampler.sample(rng);
  if (i >= policy_of.size()) throw std::invalid_argument("no selection policy for miner " + std::to_string(i + 1));
  PartyId miner = PartyId::miner(static_cast<int>(i) + 1);
  RoundOutcome out;
  out.height = chain.next_height();
  out.miner = miner;
  std::optional<Transaction> tx = policy_of[i](chain, mempool, out.height, miner);
  chain.append(miner, tx);
  if (tx) {
    out.tx_id = tx->id;
    out.fee = tx->fee;
    for (const auto& in : tx->inputs) out.redeemed_contracts.push_back(in.contract_id);
  }
  mempool.on_block(chain, tx);
  return out;
}

nlohmann::json trace_record(const RoundOutcome& r) {
  nlohmann::json j;
  j["schema"] = "trace-v1";
  j["height"] = r.height;
  j["miner"] = to_string(r.miner);
  j["tx_id"] = r.tx_id ? nlohmann::json(*r.tx_id) : nlohmann::json(nullptr);
  j["fee"] = r.fee;
  j["redeemed_contracts"] = r.redeemed_contracts;
  return j;
}

}  // namespace madlab
