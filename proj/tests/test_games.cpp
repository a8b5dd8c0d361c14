#include <gtest/gtest.h>

#include "madlab/games.hpp"

using namespace madlab;

namespace {

GameConfig mad(std::int64_t T = 3) {
  GameConfig c;
  c.T = T;
  c.f = 1;
  c.v_dep = 100;
  c.v_col = 10;
  c.f_a_dep = 2;
  c.f_b_dep = 2;
  c.f_b_col = 2;
  c.f_b_3 = 3;
  c.population.powers = {rat(9, 10), rat(1, 10)};
  return c;
}

GameConfig htlc(TokenAmount f_b, std::int64_t T = 5) {
  GameConfig c;
  c.game = GameKind::Htlc;
  c.T = T;
  c.f = 1;
  c.v_dep = 100;
  c.f_a_htlc = 2;
  c.f_b_htlc = f_b;
  c.population.powers = {rat(1, 10), rat(3, 10), rat(6, 10)};
  return c;
}

}  // namespace

TEST(Config, FieldErrors) {
  auto c = mad();
  c.f_a_dep = 1;
  try {
    c.validate();
    FAIL();
  } catch (const FieldError& e) {
    EXPECT_EQ(e.field(), "f_a_dep");
  }
  c = mad();
  c.T = 0;
  EXPECT_THROW(c.validate(), FieldError);
  c = mad();
  c.population.powers = {rat(1, 2)};
  EXPECT_THROW(c.validate(), FieldError);
}

TEST(Actions, MinerAvailability) {
  auto c = mad(3);
  SubgameId s{1, true, 0};
  EXPECT_EQ(enumerate_actions(s, c, Actor::Miner), std::vector<TxKind>{TxKind::Unrelated});
  s.published = with(with(0, TxKind::TxADep), TxKind::TxBDep);
  auto early = enumerate_actions(s, c, Actor::Miner);
  EXPECT_NE(std::find(early.begin(), early.end(), TxKind::TxMDep), early.end());
  EXPECT_EQ(std::find(early.begin(), early.end(), TxKind::TxBDep), early.end());
  s.k = 3;
  auto last = enumerate_actions(s, c, Actor::Miner);
  EXPECT_NE(std::find(last.begin(), last.end(), TxKind::TxM3), last.end());
}

TEST(Spe, MadPrescribedOutcome) {
  auto s = solve_spe(mad());
  EXPECT_EQ(s.root.a(), 98);
  EXPECT_EQ(s.root.b(), 8);
  EXPECT_EQ(s.root.p_a_confirmed(), 1);
  EXPECT_FALSE(s.attack_spe);
}

TEST(Spe, MadAliceUnaware) {
  auto c = mad();
  c.alice_knows_pre_a = false;
  auto s = solve_spe(c);
  EXPECT_EQ(s.root.a(), 0);
  EXPECT_EQ(s.root.b(), 107);
}

TEST(Spe, MinerValuesSumToFees) {
  auto s = solve_spe(mad(4));
  Rational sum = s.root.miner(0) + s.root.miner(1);
  EXPECT_EQ(sum, Rational(2 + 2 * 1 + 2));  // txA_dep, two unrelated, txB_col
}

TEST(Verify, NoProfitableDeviation) {
  for (bool knows : {true, false}) {
    auto c = mad();
    c.alice_knows_pre_a = knows;
    auto r = verify_mad(c);
    EXPECT_TRUE(r.ok) << r.to_json().dump(1);
    EXPECT_TRUE(r.spe_matches_prescribed);
  }
}

TEST(Verify, MinersSeizeOnContention) {
  auto r = verify_mad(mad(2));
  ASSERT_FALSE(r.last_round.empty());
  for (const auto& m : r.last_round) EXPECT_TRUE(m.ok) << m.state;
}

TEST(Spe, HtlcBelowThreshold) {
  auto c = htlc(10);  // threshold (2-1)/0.1 + 1 = 11
  auto s = solve_spe(c);
  EXPECT_EQ(htlc_threshold(c), 11);
  EXPECT_FALSE(s.attack_spe);
  // only the smallest miner includes txA_htlc
  EXPECT_GT(s.root.p_a_confirmed(), 0);
  EXPECT_LT(s.root.p_a_confirmed(), 1);
  TxSet both = with(with(0, TxKind::TxAHtlc), TxKind::TxBHtlc);
  auto acts = s.miners_at(SubgameId{1, true, both}).action;
  EXPECT_EQ(acts[0], TxKind::TxAHtlc);
  EXPECT_EQ(acts[2], TxKind::Unrelated);

  auto low = solve_spe(htlc(2));
  EXPECT_EQ(low.root.a(), 98);
  EXPECT_EQ(low.root.p_a_confirmed(), 1);
}

TEST(Spe, HtlcAboveThresholdWithheld) {
  auto s = solve_spe(htlc(12));
  EXPECT_TRUE(s.attack_spe);
  EXPECT_EQ(s.root.b(), 88);
  EXPECT_EQ(s.root.p_a_confirmed(), 0);
}

TEST(ClosedForm, MatchesSolver) {
  auto c = htlc(50);
  auto s = solve_spe(c);
  TxSet both = with(with(0, TxKind::TxAHtlc), TxKind::TxBHtlc);
  int checked = 0;
  for (std::int64_t k = 1; k <= c.T; ++k)
    for (bool red : {true, false})
      for (std::size_t i = 0; i < c.miners(); ++i) {
        auto cf = closed_form_utility(GameKind::Htlc, i, k, red, c);
        ASSERT_TRUE(cf.applicable);
        EXPECT_EQ(cf.value, s.value(SubgameId{k, red, both}).miner(i));
        ++checked;
      }
  EXPECT_EQ(checked, 30);
  EXPECT_FALSE(closed_form_utility(GameKind::Htlc, 0, 1, true, htlc(5)).applicable);
}

TEST(Sweep, ThresholdCrossing) {
  auto pts = sweep_fee(htlc(5), "f_b_htlc", {10, 11, 12});
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_FALSE(pts[0].attack_spe);
  EXPECT_TRUE(pts[2].attack_spe);
  EXPECT_THROW(sweep_fee(htlc(5), "nope", {1}), std::invalid_argument);
}

TEST(Simulate, AllSpeHtlcAttackSucceeds) {
  SimOptions o;
  o.b = BStrategy::Bribe;
  o.trials = 300;
  auto r = simulate(htlc(12), o);
  EXPECT_EQ(r.attack_success, 300u);
}

TEST(Simulate, AllMyopicConfirmsAlice) {
  SimOptions o;
  o.b = BStrategy::Bribe;
  o.trials = 300;
  o.policies = std::vector<MinerPolicy>(3, MinerPolicy::Myopic);
  EXPECT_EQ(simulate(htlc(12), o).a_confirmed, 300u);
  auto m = mad();
  o.policies = std::vector<MinerPolicy>(2, MinerPolicy::Myopic);
  EXPECT_EQ(simulate(m, o).a_confirmed, 300u);
}

TEST(Simulate, MadPrescribedMatchesSolver) {
  SimOptions o;
  o.trials = 200;
  auto r = simulate(mad(), o);
  EXPECT_EQ(r.a_confirmed, 200u);
  EXPECT_DOUBLE_EQ(r.mean[0], 98.0);
  EXPECT_DOUBLE_EQ(r.mean[1], 8.0);
}

TEST(Simulate, JobsDoNotChangeResult) {
  SimOptions o;
  o.b = BStrategy::Bribe;
  o.trials = 500;
  o.policies = {MinerPolicy::Myopic, MinerPolicy::NonMyopicSpe, MinerPolicy::NonMyopicSpe};
  auto a = simulate(htlc(12), o);
  o.jobs = 3;
  auto b = simulate(htlc(12), o);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(Output, CsvHeader) {
  auto csv = to_csv(solve_spe(mad(2)));
  EXPECT_EQ(csv.rfind("k,state,actor,action,utility\n", 0), 0u);
}
