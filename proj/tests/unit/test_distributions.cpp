#include <gtest/gtest.h>

#include <cmath>

#include "aoi/channel.hpp"
#include "aoi/distributions.hpp"
#include "oracles.hpp"

using aoi::DelayDistribution;
using aoi::RandomSource;

namespace {

oracle::MeanAccumulator sample_mean(const DelayDistribution& d, int n, std::uint64_t seed) {
  RandomSource rng(seed, 11);
  oracle::MeanAccumulator acc;
  for (int i = 0; i < n; ++i) acc.add(d.draw(rng));
  return acc;
}

}  // namespace

TEST(Draw, ConstantIsDegenerate) {
  RandomSource rng(1);
  const auto d = DelayDistribution::constant(1.0);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(d.draw(rng), 1.0);
}

TEST(Draw, LognormalMeanMatchesMomentFormula) {
  const auto acc = sample_mean(DelayDistribution::lognormal(1.5), 1000000, 5);
  EXPECT_NEAR(acc.mean, std::exp(1.125), 3.0 * acc.std_err());
}

TEST(Draw, EmpiricalMean) {
  const auto acc = sample_mean(DelayDistribution::empirical({{1.0, 0.5}, {3.0, 0.5}}), 1000000, 6);
  EXPECT_NEAR(acc.mean, 2.0, 3.0 * acc.std_err());
}

TEST(Draw, EverySampleMeanMatchesMean) {
  const std::vector<DelayDistribution> dists = {
      DelayDistribution::constant(0.7),
      DelayDistribution::lognormal(0.8),
      DelayDistribution::exponential(2.0),
      DelayDistribution::empirical({{0.4, 0.1}, {2.0, 0.6}, {5.0, 0.3}}),
  };
  std::uint64_t seed = 100;
  for (const auto& d : dists) {
    const auto acc = sample_mean(d, 1000000, seed++);
    EXPECT_NEAR(acc.mean, d.mean(), 4.0 * acc.std_err() + 1e-12) << d.to_string();
  }
}

TEST(Mean, ClosedForms) {
  EXPECT_EQ(DelayDistribution::constant(2.5).mean(), 2.5);
  EXPECT_EQ(DelayDistribution::exponential(0.7).mean(), 0.7);
  EXPECT_NEAR(DelayDistribution::lognormal(1.0).mean(), 1.64872, 1e-5);
}

TEST(SupportInf, PerFamily) {
  EXPECT_EQ(DelayDistribution::lognormal(1.5).support_inf(), 0.0);
  EXPECT_EQ(DelayDistribution::constant(1.2).support_inf(), 1.2);
  EXPECT_EQ(DelayDistribution::empirical({{0.4, 0.1}, {2.0, 0.9}}).support_inf(), 0.4);
  EXPECT_EQ(DelayDistribution::exponential(3.0).support_inf(), 0.0);
}

TEST(Distribution, RejectsInvalidParameters) {
  EXPECT_THROW(DelayDistribution::lognormal(0.0), aoi::InvalidParameter);
  EXPECT_THROW(DelayDistribution::lognormal(-1.0), aoi::InvalidParameter);
  EXPECT_THROW(DelayDistribution::exponential(0.0), aoi::InvalidParameter);
  EXPECT_THROW(DelayDistribution::constant(-0.1), aoi::InvalidParameter);
  EXPECT_THROW(DelayDistribution::empirical({{1.0, 0.5}, {2.0, 0.4}}), aoi::InvalidParameter);
  EXPECT_THROW(DelayDistribution::empirical({{-1.0, 1.0}}), aoi::InvalidParameter);
  EXPECT_THROW(DelayDistribution::empirical({}), aoi::InvalidParameter);
}

TEST(Distribution, ParseRoundTrips) {
  for (const char* spec : {"constant:1", "lognormal:1.5", "exponential:0.25", "empirical:1:0.5,3:0.5"}) {
    EXPECT_EQ(DelayDistribution::parse(spec).to_string(), spec);
  }
  EXPECT_THROW(DelayDistribution::parse("gamma:1"), aoi::InvalidParameter);
  EXPECT_THROW(DelayDistribution::parse("lognormal"), aoi::InvalidParameter);
  EXPECT_THROW(DelayDistribution::parse("lognormal:abc"), aoi::InvalidParameter);
}

TEST(RetryCount, ErrorFreeChannelAlwaysOne) {
  RandomSource rng(2);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(aoi::draw_retry_count(0.0, rng), 1u);
}

TEST(RetryCount, GeometricMean) {
  for (const auto& [alpha, expected] : {std::pair{0.5, 2.0}, std::pair{0.8, 5.0}}) {
    RandomSource rng(7, 3);
    oracle::MeanAccumulator acc;
    for (int i = 0; i < 1000000; ++i) acc.add(aoi::draw_retry_count(alpha, rng));
    EXPECT_NEAR(acc.mean, expected, 3.0 * acc.std_err()) << alpha;
  }
}

TEST(RetryCount, PmfMatchesGeometric) {
  const double alpha = 0.6;
  const int n = 1000000;
  RandomSource rng(8, 1);
  std::array<int, 6> counts{};
  for (int i = 0; i < n; ++i) {
    const auto m = aoi::draw_retry_count(alpha, rng);
    if (m <= 5) ++counts[m];
  }
  for (int m = 1; m <= 5; ++m) {
    const double p = std::pow(alpha, m - 1) * (1.0 - alpha);
    const double se = std::sqrt(p * (1.0 - p) / n);
    EXPECT_NEAR(static_cast<double>(counts[m]) / n, p, 4.0 * se) << "m=" << m;
  }
}

TEST(RetryCount, RejectsAlphaOutsideUnitInterval) {
  RandomSource rng(1);
  EXPECT_THROW(aoi::draw_retry_count(1.0, rng), aoi::InvalidParameter);
  EXPECT_THROW(aoi::draw_retry_count(-0.1, rng), aoi::InvalidParameter);
}

TEST(Channel, ValidatesAndDerivesBaselineChannels) {
  const aoi::ChannelModel ch(0.8, DelayDistribution::lognormal(1.5), DelayDistribution::lognormal(1.0));
  EXPECT_DOUBLE_EQ(ch.mean_attempts(), 5.0);
  EXPECT_EQ(ch.without_backward_delay().backward.mean(), 0.0);
  EXPECT_EQ(ch.error_free().alpha, 0.0);
  EXPECT_THROW(aoi::ChannelModel(1.0, DelayDistribution::constant(1), DelayDistribution::constant(0)),
               aoi::InvalidParameter);
  EXPECT_THROW(aoi::ChannelModel(0.1, DelayDistribution::constant(0), DelayDistribution::constant(1)),
               aoi::InvalidParameter);
}

TEST(Draw, DeterministicUnderSeed) {
  const auto d = DelayDistribution::lognormal(1.2);
  RandomSource a(77, 1);
  RandomSource b(77, 1);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(d.draw(a), d.draw(b));
}
