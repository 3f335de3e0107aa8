#include <gtest/gtest.h>

#include "robustree/hof.hpp"
#include "support/fixtures.hpp"
#include "support/properties.hpp"

using namespace robustree;

namespace {

using TreePtr = std::shared_ptr<const TreeGenotype>;

TreePtr stump_at(int k) { return std::make_shared<const TreeGenotype>(fixtures::stump(0, k / 1000.0, 0, 1)); }

MixedTree pure(int k) { return MixedTree::pure(stump_at(k)); }

std::vector<TreePtr> population(int n) {
  std::vector<TreePtr> out;
  for (int k = 0; k < n; ++k) out.push_back(stump_at(k));
  return out;
}

double constant_score(const MixedTree&) { return 0.5; }

}  // namespace

TEST(HallOfFame, ZeroCapacityStaysEmpty) {
  HallOfFame<TreeGenotype> hof(HofPolicy::NashMixed, 0);
  EXPECT_FALSE(hof.insert(pure(1), 1.0, 0));
  EXPECT_TRUE(hof.empty());
  const auto pop = population(3);
  const std::vector<double> fit{0.1, 0.2, 0.3};
  record_generation<TreeGenotype>(hof, pop, fit, MixedTree::pure(pop[0]), 0, constant_score);
  EXPECT_TRUE(hof.empty());
  EXPECT_EQ(hof.evaluation_set(pop).size(), 3u);
}

TEST(HallOfFame, EvictsLowestFitness) {
  HallOfFame<TreeGenotype> hof(HofPolicy::NashMixed, 2);
  hof.insert(pure(1), 0.5, 0);
  hof.insert(pure(2), 0.2, 1);
  EXPECT_TRUE(hof.insert(pure(3), 0.7, 2));
  ASSERT_EQ(hof.size(), 2u);
  EXPECT_EQ(hof.evictions(), 1u);
  for (const auto& e : hof.entries()) EXPECT_NE(e.fitness, 0.2);
  EXPECT_FALSE(hof.insert(pure(4), 0.1, 3));
  EXPECT_EQ(hof.size(), 2u);
}

TEST(HallOfFame, TiesEvictTheOldest) {
  HallOfFame<TreeGenotype> hof(HofPolicy::NashMixed, 2);
  hof.insert(pure(1), 0.5, 0);
  hof.insert(pure(2), 0.5, 1);
  hof.insert(pure(3), 0.5, 2);
  ASSERT_EQ(hof.size(), 2u);
  for (const auto& e : hof.entries()) EXPECT_NE(e.generation, 0u);
  // Same generation: insertion order decides.
  HallOfFame<TreeGenotype> same(HofPolicy::NashMixed, 1);
  same.insert(pure(1), 0.5, 4);
  same.insert(pure(2), 0.5, 4);
  ASSERT_EQ(same.size(), 1u);
  EXPECT_EQ(same.entries()[0].sequence, 1u);
}

TEST(HallOfFame, EquivalentEntriesAreNotRepeated) {
  HallOfFame<TreeGenotype> hof(HofPolicy::NashMixed, 10);
  hof.insert(pure(1), 0.5, 0);
  EXPECT_FALSE(hof.insert(pure(1), 0.9, 1));
  EXPECT_EQ(hof.duplicates(), 1u);
  EXPECT_EQ(hof.size(), 1u);
  const std::vector<double> w{0.3, 0.7};
  hof.insert(MixedTree::from_weights({stump_at(1), stump_at(2)}, w), 0.4, 2);
  const std::vector<double> w2{0.7, 0.3};
  EXPECT_TRUE(hof.insert(MixedTree::from_weights({stump_at(1), stump_at(2)}, w2), 0.4, 2));
  EXPECT_FALSE(hof.insert(MixedTree::from_weights({stump_at(2), stump_at(1)}, w2), 0.4, 3));
  EXPECT_EQ(hof.size(), 3u);
}

TEST(HallOfFame, LongRunKeepsTheFittest) {
  HallOfFame<TreeGenotype> hof(HofPolicy::TopK, 500);
  Rng rng(1);
  std::vector<double> all;
  for (int k = 0; k < 1000; ++k) {
    const double f = uniform01(rng);
    all.push_back(f);
    hof.insert(pure(k), f, static_cast<std::size_t>(k));
  }
  EXPECT_EQ(hof.size(), 500u);
  EXPECT_EQ(hof.insertions(), 1000u);
  EXPECT_EQ(hof.evictions(), 500u);
  std::sort(all.begin(), all.end(), std::greater<>());
  double kept_min = 1.0;
  for (const auto& e : hof.entries()) kept_min = std::min(kept_min, e.fitness);
  EXPECT_EQ(kept_min, all[499]);
}

TEST(HallOfFame, UnboundedArchive) {
  HallOfFame<TreeGenotype> hof(HofPolicy::TopK, std::nullopt);
  for (int k = 0; k < 700; ++k) hof.insert(pure(k), 0.1, 0);
  EXPECT_EQ(hof.size(), 700u);
  hof.set_max_size(10);
  EXPECT_EQ(hof.size(), 10u);
}

TEST(HallOfFame, EvaluationSetMergesWithoutRepeats) {
  const auto pop = population(50);
  HallOfFame<TreeGenotype> hof(HofPolicy::NashMixed, 100);
  // Three archived pure strategies coincide with population members.
  hof.insert(MixedTree::pure(stump_at(3)), 0.1, 0);
  hof.insert(MixedTree::pure(stump_at(7)), 0.1, 0);
  hof.insert(MixedTree::pure(stump_at(49)), 0.1, 0);
  const std::vector<double> w{0.5, 0.5};
  hof.insert(MixedTree::from_weights({pop[0], pop[1]}, w), 0.1, 0);
  hof.insert(pure(500), 0.1, 0);
  EXPECT_EQ(hof.evaluation_set(pop).size(), 52u);
}

TEST(RecordGeneration, BestOnlyArchivesTheFittest) {
  HallOfFame<TreeGenotype> hof(HofPolicy::BestOnly, 100);
  const auto pop = population(5);
  const std::vector<double> fit{0.1, 0.9, 0.3, 0.9, 0.2};
  const std::vector<double> w{0.5, 0.5};
  record_generation<TreeGenotype>(hof, pop, fit, MixedTree::from_weights({pop[0], pop[2]}, w), 0, constant_score);
  ASSERT_EQ(hof.size(), 1u);
  EXPECT_EQ(*hof.entries()[0].mixed.members()[0].genotype, *pop[1]);
}

TEST(RecordGeneration, NashPoliciesFollowTheEquilibrium) {
  const auto pop = population(6);
  const std::vector<double> fit{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  const std::vector<double> w{0.2, 0.3, 0.5};
  const auto eq = MixedTree::from_weights({pop[0], pop[2], pop[4]}, w);

  HallOfFame<TreeGenotype> mixed(HofPolicy::NashMixed, 100);
  record_generation<TreeGenotype>(mixed, pop, fit, eq, 0, constant_score);
  ASSERT_EQ(mixed.size(), 1u);
  EXPECT_EQ(mixed.entries()[0].mixed.size(), 3u);

  HallOfFame<TreeGenotype> singles(HofPolicy::NashSingles, 100);
  record_generation<TreeGenotype>(singles, pop, fit, eq, 0, constant_score);
  EXPECT_EQ(singles.size(), 3u);
  for (const auto& e : singles.entries()) EXPECT_TRUE(e.mixed.is_pure());

  HallOfFame<TreeGenotype> saddle(HofPolicy::NashMixed, 100);
  record_generation<TreeGenotype>(saddle, pop, fit, MixedTree::pure(pop[2]), 0, constant_score);
  ASSERT_EQ(saddle.size(), 1u);
  EXPECT_TRUE(saddle.entries()[0].mixed.is_pure());
}

TEST(RecordGeneration, TopKUsesTheEquilibriumSupportSize) {
  const auto pop = population(6);
  const std::vector<double> fit{0.1, 0.6, 0.3, 0.4, 0.5, 0.2};
  const std::vector<double> w{0.5, 0.5};
  const auto eq = MixedTree::from_weights({pop[0], pop[2]}, w);

  HallOfFame<TreeGenotype> topk(HofPolicy::TopK, 100);
  record_generation<TreeGenotype>(topk, pop, fit, eq, 0, constant_score);
  ASSERT_EQ(topk.size(), 2u);
  EXPECT_EQ(*topk.entries()[0].mixed.members()[0].genotype, *pop[1]);
  EXPECT_EQ(*topk.entries()[1].mixed.members()[0].genotype, *pop[4]);

  HallOfFame<TreeGenotype> topk_mixed(HofPolicy::TopKMixed, 100);
  record_generation<TreeGenotype>(topk_mixed, pop, fit, eq, 0, constant_score);
  ASSERT_EQ(topk_mixed.size(), 1u);
  for (const auto& m : topk_mixed.entries()[0].mixed.members()) EXPECT_DOUBLE_EQ(m.probability, 0.5);
}

TEST(RecordGeneration, ScoreIsTheInsertionFitness) {
  HallOfFame<TreeGenotype> hof(HofPolicy::NashSingles, 100);
  const auto pop = population(3);
  const std::vector<double> fit{0.1, 0.2, 0.3};
  const std::vector<double> w{0.5, 0.5};
  record_generation<TreeGenotype>(hof, pop, fit, MixedTree::from_weights({pop[0], pop[1]}, w), 7,
                                  [](const MixedTree& m) { return m.members()[0].genotype->node(0).value; });
  ASSERT_EQ(hof.size(), 2u);
  EXPECT_DOUBLE_EQ(hof.entries()[0].fitness, 0.0);
  EXPECT_DOUBLE_EQ(hof.entries()[1].fitness, 0.001);
  EXPECT_EQ(hof.entries()[1].generation, 7u);
}

TEST(Properties, CapacityAndEviction) {
  const auto r = properties::hof_capacity_and_eviction(10000);
  EXPECT_GE(r.cases, 10000u);
  EXPECT_TRUE(r.ok()) << r.failures << " failures, first: " << r.first_failure;
}
