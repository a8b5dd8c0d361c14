#include <gtest/gtest.h>

#include <random>

#include "madlab/ledger.hpp"

using namespace madlab;

namespace {

struct Fixture {
  Preimage pre_a = Bytes{1, 2, 3};
  Preimage pre_b = Bytes{4, 5, 6};
  Chain chain;

  Fixture(std::int64_t T = 3) {
    Transaction init;
    init.id = "init";
    init.creator = PartyId::external();
    init.account_debit = 110;
    init.outputs.push_back(Contract{"dep", 100, make_mh_dep(PartyId::alice(), PartyId::bob(), T, hash(pre_a), hash(pre_b)), {}});
    init.outputs.push_back(Contract{"col", 10, make_mh_col(PartyId::bob(), T, hash(pre_a), hash(pre_b)), {}});
    chain.append(PartyId::external(), init);
  }

  Transaction redeem(const std::string& id, PartyId who, const std::string& contract, const std::string& path,
                     std::optional<Preimage> p1, std::optional<Preimage> p2, TokenAmount fee, TokenAmount amount) {
    Transaction tx;
    tx.id = id;
    tx.creator = who;
    tx.inputs.push_back(TxInput{contract, RedeemWitness{path, p1, p2, std::nullopt}});
    tx.fee = fee;
    tx.payout = amount - fee;
    return tx;
  }
};

}  // namespace

TEST(Chain, InitOutputsGetInitHeight) {
  Fixture fx;
  EXPECT_EQ(fx.chain.height(), 1);
  EXPECT_EQ(*fx.chain.contract("dep").contract.init_height, 1);
  EXPECT_EQ(fx.chain.balance(PartyId::external()), -110);
  EXPECT_EQ(fx.chain.total_value(), 0);
}

TEST(Chain, DepAValidNextBlock) {
  Fixture fx;
  auto tx = fx.redeem("txA", PartyId::alice(), "dep", "dep-A", fx.pre_a, std::nullopt, 2, 100);
  EXPECT_TRUE(validate_transaction(tx, fx.chain, 2).valid());
  fx.chain.append(PartyId::miner(1), tx);
  EXPECT_EQ(fx.chain.balance(PartyId::alice()), 98);
  EXPECT_EQ(fx.chain.balance(PartyId::miner(1)), 2);
  EXPECT_EQ(*fx.chain.contract("dep").redeemed_by, "txA");
}

TEST(Chain, SignerIsCreator) {
  Fixture fx;
  // B cannot use dep-A even with pre_a
  auto tx = fx.redeem("txX", PartyId::bob(), "dep", "dep-A", fx.pre_a, std::nullopt, 2, 100);
  EXPECT_EQ(validate_transaction(tx, fx.chain, 5).kind, Verdict::Kind::PredicateFalse);
}

TEST(Chain, TimeLockedReportsEarliest) {
  Fixture fx(3);
  auto tx = fx.redeem("txB", PartyId::bob(), "dep", "dep-B", std::nullopt, fx.pre_b, 2, 100);
  Verdict v = validate_transaction(tx, fx.chain, 2);
  EXPECT_EQ(v.kind, Verdict::Kind::TimeLocked);
  EXPECT_EQ(v.earliest, 4);
  EXPECT_TRUE(validate_transaction(tx, fx.chain, 4).valid());
}

TEST(Chain, ConflictAfterRedeem) {
  Fixture fx;
  fx.chain.append(PartyId::miner(1), fx.redeem("txA", PartyId::alice(), "dep", "dep-A", fx.pre_a, std::nullopt, 2, 100));
  auto m = fx.redeem("txM", PartyId::miner(2), "dep", "dep-M", fx.pre_a, fx.pre_b, 100, 100);
  Verdict v = validate_transaction(m, fx.chain, 3);
  EXPECT_EQ(v.kind, Verdict::Kind::Conflicting);
  EXPECT_EQ(v.conflicting_tx, "txA");
  EXPECT_THROW(fx.chain.append(PartyId::miner(2), m), std::logic_error);
}

TEST(Chain, Overspend) {
  Fixture fx;
  auto tx = fx.redeem("txA", PartyId::alice(), "dep", "dep-A", fx.pre_a, std::nullopt, 2, 100);
  tx.payout = 99;
  EXPECT_EQ(validate_transaction(tx, fx.chain, 2).kind, Verdict::Kind::Overspend);
}

TEST(Chain, UnknownContractThrows) {
  Fixture fx;
  auto tx = fx.redeem("t", PartyId::alice(), "nope", "dep-A", fx.pre_a, std::nullopt, 2, 100);
  EXPECT_THROW(validate_transaction(tx, fx.chain, 2), UnknownContract);
}

TEST(Chain, ValueConservation) {
  Fixture fx(1);
  fx.chain.append(PartyId::miner(1), fx.redeem("txB", PartyId::bob(), "col", "col-B", std::nullopt, std::nullopt, 3, 10));
  EXPECT_EQ(fx.chain.total_value(), 0);
}

TEST(Mempool, AlwaysHasUnrelated) {
  Chain chain;
  Mempool mp(BaseFeeStream(1));
  ASSERT_EQ(mp.txs().size(), 1u);
  auto inc = mp.includable(chain, 1);
  ASSERT_EQ(inc.size(), 1u);
  Transaction t = *inc[0];
  chain.append(PartyId::miner(1), t);
  mp.on_block(chain, t);
  EXPECT_EQ(mp.txs().size(), 1u);
  EXPECT_FALSE(mp.contains(t.id));
  EXPECT_EQ(chain.balance(PartyId::miner(1)), 1);
}

TEST(Mempool, PublishRevealsPreimages) {
  Fixture fx;
  Mempool mp(BaseFeeStream(1));
  mp.publish(fx.redeem("txA", PartyId::alice(), "dep", "dep-A", fx.pre_a, std::nullopt, 2, 100), fx.chain);
  EXPECT_EQ(mp.revealed().count(fx.pre_a), 1u);
  EXPECT_EQ(mp.revealed().count(fx.pre_b), 0u);
}

TEST(Mempool, ConflictingDroppedOnBlock) {
  Fixture fx;
  Mempool mp(BaseFeeStream(1));
  auto a = fx.redeem("txA", PartyId::alice(), "dep", "dep-A", fx.pre_a, std::nullopt, 2, 100);
  auto b = fx.redeem("txB", PartyId::bob(), "dep", "dep-B", std::nullopt, fx.pre_b, 5, 100);
  mp.publish(a, fx.chain);
  mp.publish(b, fx.chain);
  fx.chain.append(PartyId::miner(1), a);
  mp.on_block(fx.chain, a);
  EXPECT_FALSE(mp.contains("txB"));
}

TEST(Myopic, PicksHighestIncludableFee) {
  Fixture fx(1);
  Mempool mp(BaseFeeStream(1));
  mp.publish(fx.redeem("txA", PartyId::alice(), "dep", "dep-A", fx.pre_a, std::nullopt, 2, 100), fx.chain);
  mp.publish(fx.redeem("txB", PartyId::bob(), "dep", "dep-B", std::nullopt, fx.pre_b, 5, 100), fx.chain);
  auto pick = myopic_policy()(fx.chain, mp, 2, PartyId::miner(1));
  ASSERT_TRUE(pick);
  EXPECT_EQ(pick->id, "txB");
}

TEST(Myopic, TimeLockedNotIncludable) {
  Fixture fx(5);
  Mempool mp(BaseFeeStream(1));
  mp.publish(fx.redeem("txB", PartyId::bob(), "dep", "dep-B", std::nullopt, fx.pre_b, 5, 100), fx.chain);
  auto pick = myopic_policy()(fx.chain, mp, 2, PartyId::miner(1));
  ASSERT_TRUE(pick);
  EXPECT_EQ(pick->fee, 1);
}

TEST(Population, Validation) {
  MinerPopulation p{{rat(1, 2), rat(1, 3)}};
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.powers.push_back(rat(1, 6));
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p.lambda_min(), rat(1, 6));
  EXPECT_THROW((MinerPopulation{{}}).validate(), std::invalid_argument);
  EXPECT_THROW((MinerPopulation{{rat(0, 1), rat(1, 1)}}).validate(), std::invalid_argument);
}

TEST(Sampler, FrequenciesAndDeterminism) {
  MinerPopulation p{{rat(1, 2), rat(1, 2)}};
  MinerSampler s(p);
  EXPECT_TRUE(s.exact());
  std::mt19937_64 r1(7), r2(7);
  int c0 = 0;
  for (int i = 0; i < 20000; ++i) {
    auto a = s.sample(r1);
    EXPECT_EQ(a, s.sample(r2));
    c0 += a == 0;
  }
  EXPECT_NEAR(c0 / 20000.0, 0.5, 0.02);
}

TEST(Replay, SameSeedSameChain) {
  auto run = [](std::uint64_t seed) {
    Chain chain;
    Mempool mp(BaseFeeStream(1));
    MinerSampler s(MinerPopulation{{rat(1, 2), rat(1, 2)}});
    std::mt19937_64 rng(seed);
    std::vector<SelectionPolicy> pol(2, myopic_policy());
    std::string out;
    for (int i = 0; i < 20; ++i) out += trace_record(advance_round(chain, mp, s, pol, rng)).dump();
    return out;
  };
  EXPECT_EQ(run(3), run(3));
}
