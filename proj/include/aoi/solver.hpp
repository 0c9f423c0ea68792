#ifndef AOI_SOLVER_HPP
#define AOI_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>

#include "aoi/channel.hpp"
#include "aoi/epoch_model.hpp"
#include "aoi/error.hpp"
#include "aoi/penalty.hpp"

namespace aoi {

struct SolverConfig {
  double tol_beta = 1e-4;  ///< outer bisection: stop when k2 - k1 < tol_beta
  double tol_b = 1e-7;     ///< inner bisection on the threshold
  McConfig mc{};
  std::optional<std::pair<double, double>> bracket_hint;  ///< initial (k1, k2)
  int max_iter = 200;
  /// Proceed even if classify_assumption cannot certify the pair.
  bool allow_unverified_assumption = false;

  void validate() const {
    if (!(tol_beta > 0.0) || !(tol_b > 0.0)) throw InvalidParameter("solver tolerances must be > 0");
    if (max_iter < 1) throw InvalidParameter("max_iter must be >= 1");
    if (mc.samples < 1) throw InvalidParameter("mc.samples must be >= 1");
    if (bracket_hint && !(bracket_hint->first < bracket_hint->second)) {
      throw InvalidParameter("bracket hint needs k1 < k2");
    }
  }
};

/// The solved threshold policy: after a successful delivery with age delta and
/// acknowledgement delay x, wait max(b - delta - x, 0); after a failure, resend
/// immediately. beta is the long-run average penalty the policy attains.
struct OptimalPolicy {
  double beta = 0.0;
  double b = 0.0;
  ChannelModel channel;
  AgePenalty penalty;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  double beta_std_err = 0.0;
  int iterations = 0;

  double wait(double delta, double x) const { return std::max(b - delta - x, 0.0); }
};

struct FBetaEval {
  double f1 = 0.0;  ///< E[integral of p over the epoch]
  double f2 = 0.0;  ///< E[epoch length]
  double f = 0.0;   ///< f1 - beta f2
  double std_err = 0.0;
  double b = 0.0;   ///< threshold used for this beta
};

struct ZeroWaitVerdict {
  bool optimal = false;
  double margin = 0.0;  ///< left side minus zero-wait ratio
  double lhs = 0.0;     ///< E[p(ess inf (Y + X) + Y')]
  double ratio = 0.0;   ///< zero-wait average penalty
  double std_err = 0.0;
};

/// Optimal sampling for one (channel, penalty) pair. Builds one draw pool at
/// construction and evaluates every expectation on it, so the estimated
/// E[p(c + Y')] is monotone in c and both bisections act on deterministic
/// functions. Construction cost is O(samples); each f(beta) is O(samples)
/// times the inner bisection depth.
class Solver {
 public:
  Solver(ChannelModel channel, AgePenalty penalty, SolverConfig cfg)
      : channel_(std::move(channel)),
        penalty_(std::move(penalty)),
        cfg_(std::move(cfg)),
        pool_((cfg_.validate(), DrawPool::build(channel_, cfg_.mc))) {}

  const ChannelModel& channel() const { return channel_; }
  const AgePenalty& penalty() const { return penalty_; }
  const SolverConfig& config() const { return cfg_; }
  const DrawPool& pool() const { return pool_; }

  double expected_penalty_at(double c) const { return pool_.expected_penalty_at(c, penalty_); }

  /// Smallest c >= 0 with E[p(c + Y')] >= beta, to within tol_b. Returns the
  /// left end of the final bracket.
  double threshold(double beta) const {
    if (!std::isfinite(beta)) throw UnboundedThreshold("threshold requested for non-finite beta");
    if (expected_penalty_at(0.0) >= beta) return 0.0;
    double lo = 0.0;
    double hi = std::max(1.0, pool_.expect([&](std::size_t i) { return pool_.resid(i); }));
    int doublings = 0;
    while (expected_penalty_at(hi) < beta) {
      lo = hi;
      hi *= 2.0;
      if (++doublings > cfg_.max_iter || !std::isfinite(hi) || hi > 1e300) {
        throw UnboundedThreshold("no finite waiting threshold reaches beta=" + detail::format_number(beta) +
                                 " (penalty supremum " + detail::format_number(penalty_.bounds().p_upper) + ")");
      }
    }
    while (hi - lo > cfg_.tol_b * std::max(1.0, hi)) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (expected_penalty_at(mid) >= beta) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    return lo;
  }

  FBetaEval f(double beta) const {
    FBetaEval out;
    out.b = threshold(beta);
    const double b = out.b;
    const auto length = [&](std::size_t i) {
      return pool_.x1(i) + std::max(b - pool_.y_prev(i) - pool_.x1(i), 0.0) + pool_.resid(i);
    };
    const auto area = [&](std::size_t i) {
      const double y = pool_.y_prev(i);
      return penalty_.integral(y, y + length(i));
    };
    out.f1 = pool_.expect(area);
    out.f2 = pool_.expect(length);
    out.f = out.f1 - beta * out.f2;
    out.std_err = pool_.estimate([&](std::size_t i) { return area(i) - beta * length(i); }).std_err;
    return out;
  }

  /// Zero-wait average penalty E[integral] / E[length], with delta-method s.e.
  Estimate zero_wait_ratio() const {
    const auto length = [&](std::size_t i) { return pool_.x1(i) + pool_.resid(i); };
    const auto area = [&](std::size_t i) {
      const double y = pool_.y_prev(i);
      return penalty_.integral(y, y + length(i));
    };
    const double f1 = pool_.expect(area);
    const double f2 = pool_.expect(length);
    const double ratio = f1 / f2;
    const double se = pool_.estimate([&](std::size_t i) { return area(i) - ratio * length(i); }).std_err / f2;
    return {ratio, se};
  }

  /// Bisection on f(beta) = f1 - beta f2 between k1 near p(0) and the
  /// zero-wait average, which is always a feasible upper bound on the optimum.
  OptimalPolicy solve() const {
    if (!cfg_.allow_unverified_assumption) {
      const AssumptionReport report = classify_assumption(penalty_, channel_, std::numeric_limits<double>::infinity());
      if (!report.satisfied) {
        throw PreconditionError("assumption not certified (" + report.detail +
                                "); pass allow_unverified_assumption to proceed");
      }
    }
    const PenaltyBounds bounds = penalty_.bounds();
    double k1 = 0.0;
    double k2 = 0.0;
    if (cfg_.bracket_hint) {
      k1 = cfg_.bracket_hint->first;
      k2 = cfg_.bracket_hint->second;
    } else {
      k1 = bounds.p_lower + 1e-9;
      k2 = zero_wait_ratio().value;
    }
    int iterations = 0;
    if (f(k1).f < 0.0) {
      // root lies at or below k1: shrink toward p(0)
      double lo = bounds.p_lower;
      while (f(k1).f < 0.0) {
        k2 = k1;
        k1 = lo + 0.5 * (k1 - lo);
        if (++iterations > cfg_.max_iter) throw BracketingFailure("f(beta) < 0 at every probed lower bracket");
      }
    }
    if (k2 <= k1) k2 = k1 + cfg_.tol_beta;
    while (f(k2).f > 0.0) {
      double next = k1 + 2.0 * (k2 - k1);
      if (std::isfinite(bounds.p_upper)) next = std::min(next, 0.5 * (k2 + bounds.p_upper));
      k1 = k2;
      k2 = next;
      if (++iterations > cfg_.max_iter) {
        throw BracketingFailure("f(beta) stayed positive after " + std::to_string(cfg_.max_iter) + " expansions");
      }
    }

    double beta = 0.5 * (k1 + k2);
    do {
      beta = 0.5 * (k1 + k2);
      if (f(beta).f < 0.0) {
        k2 = beta;
      } else {
        k1 = beta;
      }
      if (++iterations > cfg_.max_iter) throw BracketingFailure("bisection did not converge within max_iter");
    } while (k2 - k1 >= cfg_.tol_beta);
    beta = 0.5 * (k1 + k2);

    const FBetaEval at = f(beta);
    OptimalPolicy policy{beta, at.b, channel_, penalty_, k1, k2, at.std_err / at.f2, iterations};
    return policy;
  }

  /// Zero-wait is optimal iff ess inf E[p(Y + X + Y')] >= zero-wait average.
  /// Since p is non-decreasing the essential infimum sits at inf Y + inf X.
  ZeroWaitVerdict zero_wait() const {
    const double offset = channel_.forward.support_inf() + channel_.backward.support_inf();
    const Estimate lhs = pool_.estimate([&](std::size_t i) { return penalty_.eval(offset + pool_.resid(i)); });
    const Estimate ratio = zero_wait_ratio();
    ZeroWaitVerdict v;
    v.lhs = lhs.value;
    v.ratio = ratio.value;
    v.margin = lhs.value - ratio.value;
    v.optimal = v.margin >= 0.0;
    v.std_err = std::hypot(lhs.std_err, ratio.std_err);
    return v;
  }

  /// p(zbar) >= zero-wait average: the waiting bound zbar never binds.
  bool feasible(double zbar) const {
    if (!(zbar >= 0.0)) throw DomainError("zbar must be >= 0");
    return penalty_.eval(zbar) >= zero_wait_ratio().value;
  }

  /// Cost of one epoch from state (delta, x): wait `first_wait` before the
  /// first attempt, then follow the threshold rule of `policy` at every retry.
  /// Uses the stage delays of pool entry i.
  double rollout_cost(const OptimalPolicy& policy, std::size_t i, double delta, double x, double first_wait) const {
    const EpochDraw& e = pool_.draw(i);
    double age = delta;   // age at the start of the current stage
    double ack = x;       // acknowledgement delay preceding the current attempt
    double wait = first_wait;
    double length = 0.0;
    for (std::uint32_t j = 0; j < e.m; ++j) {
      const double stage = ack + wait + e.ys[j];
      length += stage;
      age += stage;
      if (j + 1 < e.m) {
        ack = e.xs[j];
        wait = policy.wait(age, ack);
      }
    }
    return penalty_.integral(delta, delta + length) - policy.beta * length;
  }

  /// Q(delta, x, z) - J(delta, x) for the threshold policy, on common draws.
  Estimate q_gap(const OptimalPolicy& policy, double delta, double x, double z) const {
    if (!(z >= 0.0) || !(delta >= 0.0) || !(x >= 0.0)) throw DomainError("q_gap needs delta, x, z >= 0");
    const double mu = policy.wait(delta, x);
    if (z == mu) return {0.0, 0.0};
    return pool_.estimate(
        [&](std::size_t i) { return rollout_cost(policy, i, delta, x, z) - rollout_cost(policy, i, delta, x, mu); });
  }

 private:
  ChannelModel channel_;
  AgePenalty penalty_;
  SolverConfig cfg_;
  DrawPool pool_;
};

inline double threshold_b(double beta, const ChannelModel& channel, const AgePenalty& penalty,
                          const SolverConfig& cfg) {
  return Solver(channel, penalty, cfg).threshold(beta);
}

inline FBetaEval f_beta(double beta, const ChannelModel& channel, const AgePenalty& penalty, const SolverConfig& cfg) {
  return Solver(channel, penalty, cfg).f(beta);
}

inline OptimalPolicy solve_beta(const ChannelModel& channel, const AgePenalty& penalty, const SolverConfig& cfg) {
  return Solver(channel, penalty, cfg).solve();
}

inline ZeroWaitVerdict zero_wait_optimal(const ChannelModel& channel, const AgePenalty& penalty,
                                         const SolverConfig& cfg) {
  return Solver(channel, penalty, cfg).zero_wait();
}

inline bool feasibility_zbar(const ChannelModel& channel, const AgePenalty& penalty, double zbar,
                             const SolverConfig& cfg) {
  return Solver(channel, penalty, cfg).feasible(zbar);
}

inline Estimate q_gap(const OptimalPolicy& policy, double delta, double x, double z, const SolverConfig& cfg) {
  return Solver(policy.channel, policy.penalty, cfg).q_gap(policy, delta, x, z);
}

}  // namespace aoi

#endif  // AOI_SOLVER_HPP
