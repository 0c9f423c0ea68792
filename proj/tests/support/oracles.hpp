// Reference computations for the test suites. Nothing here calls into the
// solver or the penalty integrals; everything is recomputed from scratch.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

// Random123 known-answer vectors for Philox4x32-10.
struct PhiloxVector {
  std::array<std::uint32_t, 4> ctr;
  std::array<std::uint32_t, 2> key;
  std::array<std::uint32_t, 4> expected;
};

inline const std::array<PhiloxVector, 3> kPhiloxVectors = {{
    {{0u, 0u, 0u, 0u}, {0u, 0u}, {0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}},
    {{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
     {0xffffffffu, 0xffffffffu},
     {0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}},
    {{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
     {0xa4093822u, 0x299f31d0u},
     {0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}},
}};

// Zero-wait average of p(d) = a d over constant delays x, y with failure
// probability alpha, by summing the geometric series over the attempt count.
// An epoch with m attempts lasts m (x + y) and starts at age y.
inline double constant_zero_wait_average(double x, double y, double alpha, double a) {
  double area = 0.0;
  double length = 0.0;
  double weight = 1.0 - alpha;
  for (int m = 1; m < 100000 && weight > 1e-300; ++m) {
    const double len = m * (x + y);
    area += weight * a * (y * len + 0.5 * len * len);
    length += weight * len;
    weight *= alpha;
    if (alpha == 0.0) break;
  }
  return area / length;
}

// Scalar Riccati ODE dn/dt = sigma^2 - 2 theta n - (h^2/r) n^2, n(0) = 0, by
// classical RK4 with a fixed step.
inline double riccati_rk4(double delta, double theta, double sigma, double h, double r, double step = 1e-3) {
  if (delta <= 0.0) return 0.0;
  const auto f = [&](double n) { return sigma * sigma - 2.0 * theta * n - h * h / r * n * n; };
  const long steps = static_cast<long>(std::ceil(delta / step));
  const double dt = delta / steps;
  double n = 0.0;
  for (long i = 0; i < steps; ++i) {
    const double k1 = f(n);
    const double k2 = f(n + 0.5 * dt * k1);
    const double k3 = f(n + 0.5 * dt * k2);
    const double k4 = f(n + dt * k3);
    n += dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
  }
  return n;
}

struct WeightedAtom {
  double value;
  double prob;
};

struct ReferenceSolution {
  double beta;
  std::vector<double> waits;  // optimal wait per forward-delay atom
};

// Error-free channel, no acknowledgement delay, discrete forward delay Y.
// The state at the start of an epoch is the previous forward delay d, and the
// sampler picks any wait z(d) >= 0. For fixed beta each state is minimized on
// its own by golden-section search (the per-state cost is convex in z), then
// beta is updated to the resulting ratio until it stops moving.
// `antiderivative` must satisfy antiderivative' = p.
inline ReferenceSolution single_sample_reference(const std::vector<WeightedAtom>& y,
                                                 const std::function<double(double)>& antiderivative,
                                                 double beta0) {
  const auto state_cost = [&](double d, double z, double beta) {
    double c = 0.0;
    for (const WeightedAtom& a : y) {
      c += a.prob * (antiderivative(d + z + a.value) - antiderivative(d) - beta * (z + a.value));
    }
    return c;
  };
  const auto best_wait = [&](double d, double beta) {
    double hi = 1.0;
    while (state_cost(d, 2.0 * hi, beta) < state_cost(d, hi, beta)) hi *= 2.0;
    double lo = 0.0;
    hi *= 2.0;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = hi - g * (hi - lo);
    double b = lo + g * (hi - lo);
    double fa = state_cost(d, a, beta);
    double fb = state_cost(d, b, beta);
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
      if (fa <= fb) {
        hi = b;
        b = a;
        fb = fa;
        a = hi - g * (hi - lo);
        fa = state_cost(d, a, beta);
      } else {
        lo = a;
        a = b;
        fa = fb;
        b = lo + g * (hi - lo);
        fb = state_cost(d, b, beta);
      }
    }
    const double z = 0.5 * (lo + hi);
    return state_cost(d, 0.0, beta) <= state_cost(d, z, beta) ? 0.0 : z;
  };

  ReferenceSolution sol{beta0, std::vector<double>(y.size(), 0.0)};
  for (int round = 0; round < 200; ++round) {
    double area = 0.0;
    double length = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = y[i].value;
      sol.waits[i] = best_wait(d, sol.beta);
      for (const WeightedAtom& a : y) {
        const double len = sol.waits[i] + a.value;
        area += y[i].prob * a.prob * (antiderivative(d + len) - antiderivative(d));
        length += y[i].prob * a.prob * len;
      }
    }
    const double next = area / length;
    const bool done = std::abs(next - sol.beta) < 1e-12 * std::max(1.0, next);
    sol.beta = next;
    if (done) break;
  }
  return sol;
}

// Running mean and standard error of the mean.
struct MeanAccumulator {
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    ++n;
    const double d = v - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (v - mean);
  }
  double std_err() const { return n < 2 ? 0.0 : std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)); }
};

}  // namespace oracle
