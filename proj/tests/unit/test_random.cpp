#include <gtest/gtest.h>

#include <set>

#include "aoi/random.hpp"
#include "oracles.hpp"

using aoi::RandomSource;

TEST(Philox, MatchesKnownAnswerVectors) {
  for (const auto& v : oracle::kPhiloxVectors) {
    EXPECT_EQ(aoi::philox4x32_10(v.ctr, v.key), v.expected);
  }
}

TEST(RandomSource, SameSeedAndStreamGiveIdenticalSequences) {
  RandomSource a(42, 7);
  RandomSource b(42, 7);
  for (int i = 0; i < 10000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(RandomSource, StreamsAndSeedsDiffer) {
  RandomSource a(42, 7);
  RandomSource b(42, 8);
  RandomSource c(43, 7);
  int same_b = 0;
  int same_c = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u32();
    same_b += x == b.next_u32();
    same_c += x == c.next_u32();
  }
  EXPECT_LT(same_b, 3);
  EXPECT_LT(same_c, 3);
}

TEST(RandomSource, SplitIsIndependentOfParentPosition) {
  RandomSource parent(9, 0);
  RandomSource early = parent.split(5);
  for (int i = 0; i < 100; ++i) parent.next_u32();
  RandomSource late = parent.split(5);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(early.next_u32(), late.next_u32());
}

TEST(RandomSource, UniformStaysInOpenUnitInterval) {
  RandomSource rng(1, 2);
  oracle::MeanAccumulator acc;
  for (int i = 0; i < 200000; ++i) {
    const double u = rng.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    acc.add(u);
  }
  EXPECT_NEAR(acc.mean, 0.5, 4.0 * acc.std_err());
}

TEST(RandomSource, NormalHasUnitVariance) {
  RandomSource rng(3, 4);
  oracle::MeanAccumulator mean;
  oracle::MeanAccumulator square;
  for (int i = 0; i < 200000; ++i) {
    const double z = rng.normal();
    mean.add(z);
    square.add(z * z);
  }
  EXPECT_NEAR(mean.mean, 0.0, 4.0 * mean.std_err());
  EXPECT_NEAR(square.mean, 1.0, 4.0 * square.std_err());
}
