#ifndef AOI_SIMULATOR_HPP
#define AOI_SIMULATOR_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "aoi/channel.hpp"
#include "aoi/epoch_model.hpp"
#include "aoi/penalty.hpp"
#include "aoi/solver.hpp"

namespace aoi {

enum class PolicyKind { Optimal, ZeroWait, OneWay, TwoWayErrorFree, OneWayErrorFree };

inline constexpr std::array<PolicyKind, 5> kAllPolicies = {PolicyKind::Optimal, PolicyKind::ZeroWait,
                                                           PolicyKind::OneWay, PolicyKind::TwoWayErrorFree,
                                                           PolicyKind::OneWayErrorFree};

inline const char* policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Optimal:
      return "optimal";
    case PolicyKind::ZeroWait:
      return "zero-wait";
    case PolicyKind::OneWay:
      return "1-way";
    case PolicyKind::TwoWayErrorFree:
      return "2-wayEF";
    case PolicyKind::OneWayErrorFree:
      return "1-wayEF";
  }
  return "?";
}

inline std::optional<PolicyKind> parse_policy(std::string_view name) {
  for (PolicyKind k : kAllPolicies) {
    if (name == policy_name(k)) return k;
  }
  return std::nullopt;
}

/// The channel a policy believes in when it is solved.
inline ChannelModel assumed_channel(PolicyKind kind, const ChannelModel& truth) {
  switch (kind) {
    case PolicyKind::OneWay:
      return truth.without_backward_delay();
    case PolicyKind::TwoWayErrorFree:
      return truth.error_free();
    case PolicyKind::OneWayErrorFree:
      return truth.without_backward_delay().error_free();
    default:
      return truth;
  }
}

/// A sampling policy deployed on the true channel. Every variant except
/// zero-wait carries a threshold solved on its assumed channel.
struct Policy {
  PolicyKind kind = PolicyKind::ZeroWait;
  std::optional<OptimalPolicy> solved;

  static Policy zero_wait() { return {}; }

  static Policy threshold(PolicyKind kind, OptimalPolicy p) {
    if (kind == PolicyKind::ZeroWait) return zero_wait();
    return {kind, std::move(p)};
  }

  /// Solves `kind` on its assumed version of `truth`.
  static Policy solve(PolicyKind kind, const ChannelModel& truth, const AgePenalty& penalty, const SolverConfig& cfg) {
    if (kind == PolicyKind::ZeroWait) return zero_wait();
    return threshold(kind, solve_beta(assumed_channel(kind, truth), penalty, cfg));
  }

  /// The 1-way variants believe X = 0 and drop it from the waiting rule.
  bool ignores_ack_delay() const { return kind == PolicyKind::OneWay || kind == PolicyKind::OneWayErrorFree; }

  std::string name() const { return policy_name(kind); }
};

/// Wait before the first attempt of an epoch given the age delta at the last
/// delivery and the acknowledgement delay x. Retries never wait: the age at
/// any retry already exceeds the threshold.
inline double waiting_time(const Policy& policy, double delta, double x) {
  if (policy.kind == PolicyKind::ZeroWait || !policy.solved) return 0.0;
  const double observed = policy.ignores_ack_delay() ? delta : delta + x;
  return std::max(policy.solved->b - observed, 0.0);
}

struct SimResult {
  double avg_penalty = 0.0;
  double std_err = 0.0;
  std::uint64_t epochs = 0;
  double total_time = 0.0;
};

enum class EventKind { Sample, DeliveryOk, DeliveryFail, Ack };

inline const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Sample:
      return "sample";
    case EventKind::DeliveryOk:
      return "delivery-ok";
    case EventKind::DeliveryFail:
      return "delivery-fail";
    case EventKind::Ack:
      return "ack";
  }
  return "?";
}

struct TraceEvent {
  double t;
  EventKind kind;
  double age_before;
  double age_after;
};

/// Opt-in event log of a simulation run, capped at `capacity` events.
struct SimTrace {
  std::size_t capacity = 10000;
  std::vector<TraceEvent> events;

  void record(double t, EventKind kind, double before, double after) {
    if (events.size() < capacity) events.push_back({t, kind, before, after});
  }

  bool full() const { return events.size() >= capacity; }

  void write_csv(std::ostream& out) const {
    out << "t,event,age_before,age_after\n";
    for (const TraceEvent& e : events) {
      out << detail::format_number(e.t) << ',' << to_string(e.kind) << ',' << detail::format_number(e.age_before)
          << ',' << detail::format_number(e.age_after) << '\n';
    }
  }
};

namespace detail {

struct BatchedRun {
  SimResult result;
  std::vector<double> batch_ratio;
};

inline double batch_std_err(const std::vector<double>& ratios) {
  if (ratios.size() < 2) return 0.0;
  const double k = static_cast<double>(ratios.size());
  double mean = 0.0;
  for (double r : ratios) mean += r;
  mean /= k;
  double ss = 0.0;
  for (double r : ratios) ss += (r - mean) * (r - mean);
  return std::sqrt(ss / (k - 1.0) / k);
}

inline void record_trace(SimTrace& trace, double now, double x1, double z, const EpochDraw& stages,
                         double& generated_at) {
  double t = now + x1;
  trace.record(t, EventKind::Ack, t - generated_at, t - generated_at);
  t += z;
  for (std::uint32_t j = 0; j < stages.m; ++j) {
    if (j > 0) {
      t += stages.xs[j - 1];
      trace.record(t, EventKind::Ack, t - generated_at, t - generated_at);
    }
    const double sampled = t;
    trace.record(t, EventKind::Sample, t - generated_at, t - generated_at);
    t += stages.ys[j];
    if (j + 1 < stages.m) {
      trace.record(t, EventKind::DeliveryFail, t - generated_at, t - generated_at);
    } else {
      trace.record(t, EventKind::DeliveryOk, t - generated_at, t - sampled);
      generated_at = sampled;
    }
  }
}

/// Runs every policy on one shared stream of epoch draws. Each policy's
/// arithmetic is the same as in a solo run, so results do not depend on which
/// other policies are simulated alongside.
inline std::vector<BatchedRun> simulate(const std::vector<const Policy*>& policies, const ChannelModel& channel,
                                        const AgePenalty& penalty, std::uint64_t n_epochs, std::uint64_t seed,
                                        SimTrace* trace) {
  if (n_epochs < 100) throw InvalidParameter("simulation needs at least 100 epochs");
  RandomSource rng(seed, kSimulationStream);

  const auto batches = static_cast<std::uint64_t>(std::floor(std::sqrt(static_cast<double>(n_epochs))));
  const std::uint64_t batch_size = n_epochs / batches;
  const std::size_t n = policies.size();
  std::vector<BatchedRun> runs(n);
  std::vector<double> total_area(n, 0.0), total_time(n, 0.0), batch_area(n, 0.0), batch_time(n, 0.0), now(n, 0.0);
  for (auto& r : runs) r.batch_ratio.reserve(batches);

  double y_prev = channel.forward.draw(rng);
  double generated_at = -y_prev;  // generation time of the freshest delivered sample, traced policy only
  EpochDraw stages;

  for (std::uint64_t epoch = 0; epoch < n_epochs; ++epoch) {
    const double x1 = channel.backward.draw(rng);
    draw_stages(channel, rng, stages);
    double transmit = 0.0;
    for (std::uint32_t j = 1; j < stages.m; ++j) transmit += stages.xs[j - 1];
    for (double y : stages.ys) transmit += y;

    const bool close_batch = ((epoch + 1) % batch_size == 0 && runs[0].batch_ratio.size() + 1 < batches) ||
                             epoch + 1 == n_epochs;
    for (std::size_t k = 0; k < n; ++k) {
      const double z = waiting_time(*policies[k], y_prev, x1);
      if (k == 0 && trace && !trace->full()) record_trace(*trace, now[0], x1, z, stages, generated_at);
      const double length = x1 + z + transmit;
      batch_area[k] += penalty.integral(y_prev, y_prev + length);
      batch_time[k] += length;
      now[k] += length;
      if (close_batch) {
        runs[k].batch_ratio.push_back(batch_area[k] / batch_time[k]);
        total_area[k] += batch_area[k];
        total_time[k] += batch_time[k];
        batch_area[k] = 0.0;
        batch_time[k] = 0.0;
      }
    }
    y_prev = stages.ys.back();
  }

  for (std::size_t k = 0; k < n; ++k) {
    SimResult& r = runs[k].result;
    r.epochs = n_epochs;
    r.total_time = total_time[k];
    r.avg_penalty = total_area[k] / total_time[k];
    r.std_err = batch_std_err(runs[k].batch_ratio);
  }
  return runs;
}

}  // namespace detail

/// Renewal-reward simulation over n_epochs epochs. The penalty is integrated
/// exactly over each epoch, so deterministic channels give exact averages.
/// Epoch 0 starts right after a fictitious delivery whose forward delay is drawn
/// from Y. The s.e. comes from batch means over floor(sqrt(n_epochs)) batches.
/// Draws depend only on (seed, epoch), never on the policy, so runs of
/// different policies with one seed share random numbers.
inline SimResult run(const Policy& policy, const ChannelModel& channel, const AgePenalty& penalty,
                     std::uint64_t n_epochs, std::uint64_t seed, SimTrace* trace = nullptr) {
  return detail::simulate({&policy}, channel, penalty, n_epochs, seed, trace).front().result;
}

/// avg(a) - avg(b) on common random numbers, with the s.e. from batch means of
/// the paired per-batch differences.
struct PairedResult {
  SimResult a;
  SimResult b;
  Estimate difference;
};

inline PairedResult compare(const Policy& a, const Policy& b, const ChannelModel& channel, const AgePenalty& penalty,
                            std::uint64_t n_epochs, std::uint64_t seed) {
  const auto runs = detail::simulate({&a, &b}, channel, penalty, n_epochs, seed, nullptr);
  std::vector<double> diff(runs[0].batch_ratio.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = runs[0].batch_ratio[i] - runs[1].batch_ratio[i];
  return {runs[0].result, runs[1].result,
          {runs[0].result.avg_penalty - runs[1].result.avg_penalty, detail::batch_std_err(diff)}};
}

struct BaselineOutcome {
  std::optional<Policy> policy;
  std::optional<SimResult> result;
  std::string error;

  bool ok() const { return result.has_value(); }
};

/// Solves the three mis-specified baselines on their assumed channels, then
/// deploys all five policies on the true channel with common random numbers.
/// A failed solve marks that baseline and leaves the others untouched.
inline std::map<std::string, BaselineOutcome> run_all_baselines(const ChannelModel& channel,
                                                                const AgePenalty& penalty, std::uint64_t n_epochs,
                                                                std::uint64_t seed, const SolverConfig& cfg) {
  std::map<std::string, BaselineOutcome> out;
  std::vector<const Policy*> solved;
  std::vector<BaselineOutcome*> slots;
  for (PolicyKind kind : kAllPolicies) {
    BaselineOutcome& slot = out[policy_name(kind)];
    try {
      slot.policy = Policy::solve(kind, channel, penalty, cfg);
      solved.push_back(&*slot.policy);
      slots.push_back(&slot);
    } catch (const std::exception& e) {
      slot.error = e.what();
    }
  }
  if (!solved.empty()) {
    try {
      const auto runs = detail::simulate(solved, channel, penalty, n_epochs, seed, nullptr);
      for (std::size_t k = 0; k < runs.size(); ++k) slots[k]->result = runs[k].result;
    } catch (const std::exception& e) {
      for (BaselineOutcome* slot : slots) slot->error = e.what();
    }
  }
  return out;
}

}  // namespace aoi

#endif  // AOI_SIMULATOR_HPP
