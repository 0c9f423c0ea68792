#ifndef AOI_EPOCH_MODEL_HPP
#define AOI_EPOCH_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "aoi/channel.hpp"
#include "aoi/distributions.hpp"
#include "aoi/penalty.hpp"
#include "aoi/random.hpp"

namespace aoi {

/// Substream indices reserved for the solver's draw pool and the simulator.
inline constexpr std::uint64_t kPoolStream = 0x706f6f6cULL;
inline constexpr std::uint64_t kSimulationStream = 0x73696d75ULL;

/// Tail mass below which the geometric retry series is truncated on the exact path.
inline constexpr double kGeometricTailMass = 1e-12;

/// One epoch between successful deliveries, as seen from the sampler.
///   y_prev  forward delay of the sample delivered at the start of the epoch
///   x1      acknowledgement delay of that delivery
///   m       number of attempts in this epoch (>= 1)
///   xs      acknowledgement delays of attempts 1..m-1 (they precede attempts 2..m)
///   ys      forward delays of attempts 1..m
struct EpochDraw {
  double y_prev = 0.0;
  double x1 = 0.0;
  std::uint32_t m = 1;
  std::vector<double> xs;
  std::vector<double> ys;
};

struct McConfig {
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  /// Use exact enumeration when both delays are discrete and the scenario tree is small.
  bool prefer_exact = true;
  std::size_t max_exact_scenarios = 200000;
};

/// A point estimate with its Monte-Carlo standard error (0 for exact results).
struct Estimate {
  double value = 0.0;
  double std_err = 0.0;
};

/// Draws the retry count and stage delays of one epoch, in a fixed order
/// (m, then y_1, then (x_j, y_j) for j >= 2) that does not depend on any policy.
inline void draw_stages(const ChannelModel& channel, RandomSource& rng, EpochDraw& e) {
  e.m = draw_retry_count(channel.alpha, rng);
  e.xs.clear();
  e.ys.clear();
  e.ys.push_back(channel.forward.draw(rng));
  for (std::uint32_t j = 1; j < e.m; ++j) {
    e.xs.push_back(channel.backward.draw(rng));
    e.ys.push_back(channel.forward.draw(rng));
  }
}

inline EpochDraw draw_epoch(const ChannelModel& channel, RandomSource& rng) {
  EpochDraw e;
  e.y_prev = channel.forward.draw(rng);
  e.x1 = channel.backward.draw(rng);
  draw_stages(channel, rng, e);
  return e;
}

/// Y' = Y_1 + sum_{j=2..m} (X_j + Y_j): remaining transmission time once the
/// first attempt of the epoch has been sent.
inline double residual_sum(const EpochDraw& e) {
  double total = e.ys.front();
  for (std::size_t j = 1; j < e.ys.size(); ++j) total += e.xs[j - 1] + e.ys[j];
  return total;
}

/// Integral of p over the epoch minus beta times its length, when the sampler
/// waits z after the first acknowledgement and never again.
inline double epoch_cost(const EpochDraw& e, double z, const AgePenalty& penalty, double beta) {
  const double length = e.x1 + z + residual_sum(e);
  return penalty.integral(e.y_prev, e.y_prev + length) - beta * length;
}

namespace detail {

/// Sum of f(i) for i in [0, n): sequential within fixed 256-element chunks,
/// pairwise across chunks. The association order depends only on n.
template <class F>
double chunked_sum(std::size_t n, F&& f) {
  constexpr std::size_t kChunk = 256;
  std::vector<double> partial((n + kChunk - 1) / kChunk, 0.0);
  for (std::size_t c = 0; c < partial.size(); ++c) {
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    double s = 0.0;
    for (std::size_t i = c * kChunk; i < end; ++i) s += f(i);
    partial[c] = s;
  }
  if (partial.empty()) return 0.0;
  for (std::size_t width = 1; width < partial.size(); width *= 2) {
    for (std::size_t i = 0; i + width < partial.size(); i += 2 * width) partial[i] += partial[i + width];
  }
  return partial[0];
}

}  // namespace detail

/// A frozen set of epoch scenarios used for every expectation inside one
/// solver invocation (common random numbers). Either an i.i.d. Monte-Carlo
/// sample with equal weights or an exact enumeration of a discrete channel
/// with the geometric retry series truncated at kGeometricTailMass.
class DrawPool {
 public:
  static DrawPool sample(const ChannelModel& channel, std::size_t n, RandomSource rng) {
    if (n == 0) throw InvalidParameter("draw pool needs at least one sample");
    DrawPool pool;
    pool.exact_ = false;
    pool.draws_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pool.draws_.push_back(draw_epoch(channel, rng));
    pool.weights_.assign(n, 1.0 / static_cast<double>(n));
    pool.index();
    return pool;
  }

  /// Exact enumeration when both delays are discrete and the tree has at most
  /// `max_scenarios` leaves; nullopt otherwise.
  static std::optional<DrawPool> enumerate(const ChannelModel& channel, std::size_t max_scenarios) {
    if (!channel.forward.is_discrete() || !channel.backward.is_discrete()) return std::nullopt;
    const auto ya = channel.forward.atoms();
    const auto xa = channel.backward.atoms();
    const std::uint32_t max_m = channel.alpha == 0.0
                                    ? 1u
                                    : static_cast<std::uint32_t>(
                                          std::floor(std::log(kGeometricTailMass) / std::log(channel.alpha)) + 1.0);
    // leaves = |Y| |X| sum_m |Y|^m |X|^(m-1)
    double per_m = static_cast<double>(ya.size());
    double leaves = 0.0;
    for (std::uint32_t m = 1; m <= max_m; ++m) {
      leaves += per_m;
      per_m *= static_cast<double>(ya.size() * xa.size());
      if (leaves * static_cast<double>(ya.size() * xa.size()) > static_cast<double>(max_scenarios)) {
        return std::nullopt;
      }
    }

    DrawPool pool;
    pool.exact_ = true;
    const double kept_mass = 1.0 - std::pow(channel.alpha, static_cast<double>(max_m));
    EpochDraw current;
    std::vector<double> stage_weight;
    for (const Atom& yp : ya) {
      for (const Atom& x1 : xa) {
        for (std::uint32_t m = 1; m <= max_m; ++m) {
          const double m_weight = std::pow(channel.alpha, m - 1.0) * (1.0 - channel.alpha) / kept_mass;
          current.y_prev = yp.time;
          current.x1 = x1.time;
          current.m = m;
          pool.expand(current, ya, xa, yp.prob * x1.prob * m_weight);
        }
      }
    }
    pool.index();
    return pool;
  }

  static DrawPool build(const ChannelModel& channel, const McConfig& mc) {
    if (mc.prefer_exact) {
      if (auto exact = enumerate(channel, mc.max_exact_scenarios)) return std::move(*exact);
    }
    return sample(channel, mc.samples, RandomSource(mc.seed, kPoolStream));
  }

  std::size_t size() const { return draws_.size(); }
  bool exact() const { return exact_; }
  const EpochDraw& draw(std::size_t i) const { return draws_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  double y_prev(std::size_t i) const { return y_prev_[i]; }
  double x1(std::size_t i) const { return x1_[i]; }
  double resid(std::size_t i) const { return resid_[i]; }
  std::span<const double> residuals() const { return resid_; }

  /// Weighted mean of f(i). Monotone in f: if f <= g pointwise, expect(f) <= expect(g).
  template <class F>
  double expect(F&& f) const {
    if (exact_) return detail::chunked_sum(size(), [&](std::size_t i) { return weights_[i] * f(i); });
    return detail::chunked_sum(size(), f) / static_cast<double>(size());
  }

  /// Weighted mean with its standard error from the sample variance.
  template <class F>
  Estimate estimate(F&& f) const {
    std::vector<double> values(size());
    for (std::size_t i = 0; i < size(); ++i) values[i] = f(i);
    const auto at = [&values](std::size_t i) { return values[i]; };
    const double mean = expect(at);
    if (exact_ || size() < 2) return {mean, 0.0};
    const double ss = detail::chunked_sum(size(), [&](std::size_t i) {
      const double d = values[i] - mean;
      return d * d;
    });
    const double n = static_cast<double>(size());
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
  }

  /// E[p(c + Y')] over the pool.
  double expected_penalty_at(double c, const AgePenalty& penalty) const {
    return expect([&](std::size_t i) { return penalty.eval(c + resid_[i]); });
  }

 private:
  DrawPool() = default;

  void expand(EpochDraw& e, const std::vector<Atom>& ya, const std::vector<Atom>& xa, double weight) {
    // Enumerate all (y_1, x_2, y_2, ..., x_m, y_m) atom sequences.
    std::vector<std::size_t> digit(2 * e.m - 1, 0);
    while (true) {
      e.ys.clear();
      e.xs.clear();
      double w = weight;
      for (std::uint32_t j = 0; j < e.m; ++j) {
        const Atom& y = ya[digit[2 * j]];
        e.ys.push_back(y.time);
        w *= y.prob;
        if (j + 1 < e.m) {
          const Atom& x = xa[digit[2 * j + 1]];
          e.xs.push_back(x.time);
          w *= x.prob;
        }
      }
      draws_.push_back(e);
      weights_.push_back(w);
      std::size_t pos = 0;
      while (pos < digit.size()) {
        const std::size_t base = (pos % 2 == 0) ? ya.size() : xa.size();
        if (++digit[pos] < base) break;
        digit[pos++] = 0;
      }
      if (pos == digit.size()) break;
    }
  }

  void index() {
    y_prev_.resize(size());
    x1_.resize(size());
    resid_.resize(size());
    for (std::size_t i = 0; i < size(); ++i) {
      y_prev_[i] = draws_[i].y_prev;
      x1_[i] = draws_[i].x1;
      resid_[i] = residual_sum(draws_[i]);
    }
  }

  bool exact_ = false;
  std::vector<EpochDraw> draws_;
  std::vector<double> weights_;
  std::vector<double> y_prev_;
  std::vector<double> x1_;
  std::vector<double> resid_;
};

/// E[p(c + Y')] for the channel, estimated on a pool built from `mc`.
inline Estimate expected_penalty_at(double c, const ChannelModel& channel, const AgePenalty& penalty,
                                    const McConfig& mc) {
  if (!(c >= 0.0)) throw DomainError("offset c must be >= 0");
  const DrawPool pool = DrawPool::build(channel, mc);
  return pool.estimate([&](std::size_t i) { return penalty.eval(c + pool.resid(i)); });
}

}  // namespace aoi

#endif  // AOI_EPOCH_MODEL_HPP
