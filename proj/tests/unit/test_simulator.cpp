#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "aoi/simulator.hpp"
#include "oracles.hpp"

using aoi::AgePenalty;
using aoi::ChannelModel;
using aoi::DelayDistribution;
using aoi::Policy;
using aoi::PolicyKind;
using aoi::SolverConfig;

namespace {

ChannelModel constant_channel(double x, double y, double alpha) {
  return {alpha, DelayDistribution::constant(y), DelayDistribution::constant(x)};
}

ChannelModel heavy_channel(double alpha = 0.8) {
  return {alpha, DelayDistribution::lognormal(1.5), DelayDistribution::lognormal(1.5)};
}

aoi::OptimalPolicy with_threshold(double b) {
  aoi::OptimalPolicy p{2.0, b, constant_channel(0, 1, 0), AgePenalty::linear(1), 0, 0, 0, 0};
  return p;
}

}  // namespace

TEST(WaitingTime, Examples) {
  EXPECT_EQ(aoi::waiting_time(Policy::zero_wait(), 0.0, 0.0), 0.0);
  EXPECT_EQ(aoi::waiting_time(Policy::zero_wait(), 7.0, 3.0), 0.0);
  EXPECT_EQ(aoi::waiting_time(Policy::threshold(PolicyKind::Optimal, with_threshold(0.5)), 1.0, 0.0), 0.0);
  EXPECT_EQ(aoi::waiting_time(Policy::threshold(PolicyKind::Optimal, with_threshold(3.0)), 1.0, 0.5), 1.5);
}

TEST(WaitingTime, OneWayBaselinesIgnoreAckDelay) {
  const auto one_way = Policy::threshold(PolicyKind::OneWay, with_threshold(3.0));
  const auto two_way = Policy::threshold(PolicyKind::TwoWayErrorFree, with_threshold(3.0));
  EXPECT_EQ(aoi::waiting_time(one_way, 1.0, 0.5), 2.0);
  EXPECT_EQ(aoi::waiting_time(two_way, 1.0, 0.5), 1.5);
  EXPECT_EQ(aoi::waiting_time(Policy::threshold(PolicyKind::OneWayErrorFree, with_threshold(3.0)), 1.0, 0.5), 2.0);
}

TEST(Run, DeterministicSawtoothIsExact) {
  const auto r = aoi::run(Policy::zero_wait(), constant_channel(0, 1, 0), AgePenalty::linear(1), 10000, 1);
  EXPECT_EQ(r.avg_penalty, 1.5);
  EXPECT_EQ(r.std_err, 0.0);
  EXPECT_EQ(r.epochs, 10000u);
  EXPECT_EQ(r.total_time, 10000.0);
}

TEST(Run, UnreliableConstantChannelMatchesSeries) {
  const auto r = aoi::run(Policy::zero_wait(), constant_channel(0.5, 1, 0.5), AgePenalty::linear(1), 1000000, 2);
  EXPECT_NEAR(r.avg_penalty, oracle::constant_zero_wait_average(0.5, 1, 0.5, 1), 3.0 * r.std_err);
  EXPECT_GT(r.std_err, 0.0);
}

TEST(Run, OptimalBeatsZeroWaitOnHeavyTailChannel) {
  const auto ch = heavy_channel();
  const auto pen = AgePenalty::linear(2);
  const auto opt = Policy::solve(PolicyKind::Optimal, ch, pen, SolverConfig{});
  const auto a = aoi::run(opt, ch, pen, 1000000, 3);
  const auto z = aoi::run(Policy::zero_wait(), ch, pen, 1000000, 3);
  EXPECT_LE(a.avg_penalty, z.avg_penalty - 5.0 * std::max(a.std_err, z.std_err));
}

TEST(Run, MatchesSolverAverage) {
  const auto ch = ChannelModel(0.3, DelayDistribution::lognormal(1.0), DelayDistribution::exponential(0.5));
  const auto pen = AgePenalty::linear(1);
  const auto policy = aoi::solve_beta(ch, pen, SolverConfig{});
  const auto r = aoi::run(Policy::threshold(PolicyKind::Optimal, policy), ch, pen, 1000000, 4);
  EXPECT_NEAR(r.avg_penalty, policy.beta, 3.0 * std::hypot(r.std_err, policy.beta_std_err));
}

TEST(Run, SameSeedIsBitIdentical) {
  const auto ch = heavy_channel();
  const auto pen = AgePenalty::linear(2);
  const auto a = aoi::run(Policy::zero_wait(), ch, pen, 10000, 9);
  const auto b = aoi::run(Policy::zero_wait(), ch, pen, 10000, 9);
  EXPECT_EQ(a.avg_penalty, b.avg_penalty);
  EXPECT_EQ(a.std_err, b.std_err);
  EXPECT_EQ(a.total_time, b.total_time);
}

TEST(Run, RejectsTooFewEpochs) {
  EXPECT_THROW(aoi::run(Policy::zero_wait(), heavy_channel(), AgePenalty::linear(2), 99, 1), aoi::InvalidParameter);
}

TEST(Trace, AgeGrowsAtUnitRateAndResetsToForwardDelay) {
  const auto ch = heavy_channel(0.5);
  const auto pen = AgePenalty::linear(2);
  const auto opt = Policy::solve(PolicyKind::Optimal, ch, pen, SolverConfig{});
  aoi::SimTrace trace;
  aoi::run(opt, ch, pen, 5000, 5, &trace);
  ASSERT_EQ(trace.events.size(), trace.capacity);
  double t_prev = -1.0;
  double age_prev = 0.0;
  double sampled_at = 0.0;
  bool first = true;
  for (const auto& e : trace.events) {
    ASSERT_GE(e.t, t_prev);
    if (!first) {
      ASSERT_NEAR(e.age_before, age_prev + (e.t - t_prev), 1e-9 * std::max(1.0, e.t));
    }
    if (e.kind == aoi::EventKind::Sample) sampled_at = e.t;
    if (e.kind == aoi::EventKind::DeliveryOk) {
      ASSERT_NEAR(e.age_after, e.t - sampled_at, 1e-9 * std::max(1.0, e.t));
      ASSERT_LE(e.age_after, e.age_before);
    } else {
      ASSERT_EQ(e.age_after, e.age_before);
    }
    t_prev = e.t;
    age_prev = e.age_after;
    first = false;
  }
  std::ostringstream csv;
  trace.write_csv(csv);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "t,event,age_before,age_after");
}

TEST(Baselines, ConstantDelaysAllEqual) {
  const auto ch = constant_channel(0.5, 1, 0.5);
  const auto out = aoi::run_all_baselines(ch, AgePenalty::linear(1), 200000, 6, SolverConfig{});
  ASSERT_EQ(out.size(), 5u);
  const auto& opt = *out.at("optimal").result;
  for (const auto& [name, o] : out) {
    ASSERT_TRUE(o.ok()) << name << ": " << o.error;
    EXPECT_NEAR(o.result->avg_penalty, opt.avg_penalty, 3.0 * o.result->std_err + 1e-12) << name;
  }
}

TEST(Baselines, OptimalIsBestAndTwoWayGapGrowsWithAlpha) {
  const auto pen = AgePenalty::linear(2);
  double gap_prev = -1.0;
  for (double alpha : {0.5, 0.8}) {
    const auto out = aoi::run_all_baselines(heavy_channel(alpha), pen, 1000000, 7, SolverConfig{});
    const auto& opt = *out.at("optimal").result;
    for (const auto& [name, o] : out) {
      ASSERT_TRUE(o.ok()) << name;
      EXPECT_LE(opt.avg_penalty, o.result->avg_penalty + 3.0 * std::hypot(opt.std_err, o.result->std_err)) << name;
    }
    const double gap = out.at("2-wayEF").result->avg_penalty - opt.avg_penalty;
    EXPECT_GT(gap, gap_prev);
    gap_prev = gap;
  }
}

TEST(Baselines, AssumedChannels) {
  const auto ch = heavy_channel();
  EXPECT_EQ(aoi::assumed_channel(PolicyKind::Optimal, ch).alpha, 0.8);
  EXPECT_EQ(aoi::assumed_channel(PolicyKind::TwoWayErrorFree, ch).alpha, 0.0);
  EXPECT_EQ(aoi::assumed_channel(PolicyKind::OneWay, ch).backward.mean(), 0.0);
  const auto both = aoi::assumed_channel(PolicyKind::OneWayErrorFree, ch);
  EXPECT_EQ(both.alpha, 0.0);
  EXPECT_EQ(both.backward.mean(), 0.0);
  for (auto k : aoi::kAllPolicies) EXPECT_EQ(aoi::parse_policy(aoi::policy_name(k)), k);
  EXPECT_FALSE(aoi::parse_policy("greedy").has_value());
}

TEST(Compare, PairedDifferenceOnCommonDraws) {
  const auto ch = heavy_channel();
  const auto pen = AgePenalty::linear(2);
  const auto same = aoi::compare(Policy::zero_wait(), Policy::zero_wait(), ch, pen, 10000, 1);
  EXPECT_EQ(same.difference.value, 0.0);
  EXPECT_EQ(same.difference.std_err, 0.0);

  const auto opt = Policy::solve(PolicyKind::Optimal, ch, pen, SolverConfig{});
  const auto paired = aoi::compare(Policy::zero_wait(), opt, ch, pen, 200000, 2);
  const auto solo = aoi::run(opt, ch, pen, 200000, 2);
  EXPECT_EQ(paired.b.avg_penalty, solo.avg_penalty);
  EXPECT_EQ(paired.b.std_err, solo.std_err);
  EXPECT_GT(paired.difference.value, 0.0);
  EXPECT_LT(paired.difference.std_err, std::hypot(paired.a.std_err, paired.b.std_err));
}

TEST(Baselines, JointRunMatchesSoloRuns) {
  const auto ch = heavy_channel(0.5);
  const auto pen = AgePenalty::linear(2);
  const auto out = aoi::run_all_baselines(ch, pen, 5000, 3, SolverConfig{});
  for (const auto& [name, o] : out) {
    ASSERT_TRUE(o.ok()) << name;
    const auto solo = aoi::run(*o.policy, ch, pen, 5000, 3);
    EXPECT_EQ(o.result->avg_penalty, solo.avg_penalty) << name;
    EXPECT_EQ(o.result->std_err, solo.std_err) << name;
  }
}
