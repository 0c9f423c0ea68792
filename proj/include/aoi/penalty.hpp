#ifndef AOI_PENALTY_HPP
#define AOI_PENALTY_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <variant>

#include "aoi/channel.hpp"
#include "aoi/distributions.hpp"
#include "aoi/error.hpp"

namespace aoi {

/// Scalar Ornstein-Uhlenbeck source observed through a noisy side channel:
/// dO = -theta O dt + sigma dW, B = h O + V, E[V V] = r.
struct OuParams {
  double theta;
  double sigma;
  double h;
  double r;
};

/// Constants of the closed-form Kalman MMSE
///   n(d) = n_bar - 1 / (l + (1/n_bar - l) exp(rate d)).
struct OuConstants {
  double n_bar;  ///< steady-state error, lim n(d)
  double l;
  double c;      ///< 1/n_bar - l, strictly positive
  double rate;   ///< 2 sqrt(theta^2 + sigma^2 h^2 / r)
};

inline void validate(const OuParams& p) {
  if (!(p.theta > 0.0) || !(p.sigma > 0.0) || !(p.r > 0.0) || !(p.h >= 0.0)) {
    throw InvalidParameter("OU parameters need theta > 0, sigma > 0, r > 0, h >= 0");
  }
}

inline OuConstants ou_constants(const OuParams& p) {
  const double theta_r = p.theta * p.r;
  const double root = std::sqrt(theta_r * theta_r + p.sigma * p.sigma * p.r * p.h * p.h);
  OuConstants k{};
  // (-theta r + root) / h^2, rationalized so h -> 0 recovers sigma^2 / (2 theta)
  k.n_bar = p.sigma * p.sigma * p.r / (theta_r + root);
  k.l = p.h * p.h / (2.0 * root);
  k.c = 1.0 / k.n_bar - k.l;
  k.rate = 2.0 * root / p.r;
  return k;
}

/// Kalman-filter MMSE of the OU process at age `delta` (filter reset at the
/// sample generation time). Uses the h = 0 form when there is no side channel.
inline double ou_mmse_closed(double delta, const OuParams& p) {
  if (!(delta >= 0.0)) throw DomainError("age must be >= 0");
  if (p.h == 0.0) {
    return p.sigma * p.sigma / (2.0 * p.theta) * -std::expm1(-2.0 * p.theta * delta);
  }
  const OuConstants k = ou_constants(p);
  const double e = std::exp(-k.rate * delta);
  // n_bar - e / (l e + c), rewritten to avoid cancellation near delta = 0
  return k.n_bar * k.c * -std::expm1(-k.rate * delta) / (k.c + k.l * e);
}

/// RK4 integration of dn/dt = -2 theta n + sigma^2 - (h^2 / r) n^2, n(0) = 0.
inline double ou_mmse_numeric(double delta, const OuParams& p, double step) {
  if (!(delta >= 0.0)) throw DomainError("age must be >= 0");
  if (!(step > 0.0)) throw InvalidParameter("step must be > 0");
  if (delta == 0.0) return 0.0;
  const auto rhs = [&p](double n) { return -2.0 * p.theta * n + p.sigma * p.sigma - (p.h * p.h / p.r) * n * n; };
  const auto steps = static_cast<long>(std::ceil(delta / step));
  const double dt = delta / static_cast<double>(steps);
  double n = 0.0;
  for (long i = 0; i < steps; ++i) {
    const double k1 = rhs(n);
    const double k2 = rhs(n + 0.5 * dt * k1);
    const double k3 = rhs(n + 0.5 * dt * k2);
    const double k4 = rhs(n + dt * k3);
    n += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return n;
}

/// Adaptive Simpson quadrature of a smooth integrand on [a, b].
inline double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double abs_tol = 1e-9) {
  if (a == b) return 0.0;
  const auto simpson = [](double fa, double fm, double fb, double width) { return width / 6.0 * (fa + 4.0 * fm + fb); };
  // Lyness' recursion with Richardson correction.
  std::function<double(double, double, double, double, double, double, double, int)> recurse;
  recurse = [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double tol, int depth) {
    const double mid = 0.5 * (lo + hi);
    const double lm = 0.5 * (lo + mid);
    const double rm = 0.5 * (mid + hi);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = simpson(flo, flm, fmid, mid - lo);
    const double right = simpson(fmid, frm, fhi, hi - mid);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return recurse(lo, mid, flo, flm, fmid, left, 0.5 * tol, depth - 1) +
           recurse(mid, hi, fmid, frm, fhi, right, 0.5 * tol, depth - 1);
  };
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), abs_tol, 48);
}

struct LinearPenalty {
  double a;
};

struct PowerPenalty {
  double a;
  double n;
};

struct FloorPenalty {
  double a;
};

struct OuMmsePenalty {
  OuParams params;
};

/// p(0) and lim p(d) as d -> inf (may be +inf).
struct PenaltyBounds {
  double p_lower;
  double p_upper;
};

/// Non-decreasing age penalty p: [0, inf) -> R, finite at 0.
class AgePenalty {
 public:
  using Variant = std::variant<LinearPenalty, PowerPenalty, FloorPenalty, OuMmsePenalty>;

  static AgePenalty linear(double a) {
    if (!(a > 0.0)) throw InvalidParameter("linear penalty slope must be > 0");
    return AgePenalty(LinearPenalty{a});
  }

  static AgePenalty power(double a, double n) {
    if (!(a > 0.0) || !(n > 0.0)) throw InvalidParameter("power penalty needs a > 0 and n > 0");
    return AgePenalty(PowerPenalty{a, n});
  }

  static AgePenalty floor(double a) {
    if (!(a > 0.0)) throw InvalidParameter("floor penalty scale must be > 0");
    return AgePenalty(FloorPenalty{a});
  }

  static AgePenalty ou_mmse(OuParams params) {
    validate(params);
    return AgePenalty(OuMmsePenalty{params});
  }

  /// Grammar: linear:<a> | power:<a>:<n> | floor:<a> | ou:<theta>:<sigma>:<h>:<r>
  static AgePenalty parse(std::string_view spec) {
    const auto fields = detail::split(spec, ':');
    const std::string_view kind = fields.front();
    const auto num = [&](std::size_t i) { return detail::parse_number(fields[i], kind); };
    const auto expect = [&](std::size_t count) {
      if (fields.size() != count + 1) {
        throw InvalidParameter("penalty '" + std::string(kind) + "' expects " + std::to_string(count) + " parameter(s)");
      }
    };
    if (kind == "linear") {
      expect(1);
      return linear(num(1));
    }
    if (kind == "power") {
      expect(2);
      return power(num(1), num(2));
    }
    if (kind == "floor") {
      expect(1);
      return floor(num(1));
    }
    if (kind == "ou") {
      expect(4);
      return ou_mmse({num(1), num(2), num(3), num(4)});
    }
    throw InvalidParameter("unknown penalty '" + std::string(kind) + "'");
  }

  std::string to_string() const {
    using detail::format_number;
    return std::visit(
        [](const auto& p) -> std::string {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, LinearPenalty>) {
            return "linear:" + format_number(p.a);
          } else if constexpr (std::is_same_v<T, PowerPenalty>) {
            return "power:" + format_number(p.a) + ":" + format_number(p.n);
          } else if constexpr (std::is_same_v<T, FloorPenalty>) {
            return "floor:" + format_number(p.a);
          } else {
            return "ou:" + format_number(p.params.theta) + ":" + format_number(p.params.sigma) + ":" +
                   format_number(p.params.h) + ":" + format_number(p.params.r);
          }
        },
        penalty_);
  }

  const Variant& variant() const { return penalty_; }

  double operator()(double delta) const { return eval(delta); }

  double eval(double delta) const {
    if (!(delta >= 0.0)) throw DomainError("penalty evaluated at negative age");
    return std::visit(
        [delta](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, LinearPenalty>) {
            return p.a * delta;
          } else if constexpr (std::is_same_v<T, PowerPenalty>) {
            return p.a * std::pow(delta, p.n);
          } else if constexpr (std::is_same_v<T, FloorPenalty>) {
            return std::floor(p.a * delta);
          } else {
            return ou_mmse_closed(delta, p.params);
          }
        },
        penalty_);
  }

  /// Integral of p over [lo, hi]; closed form for every variant.
  double integral(double lo, double hi) const {
    if (!(lo >= 0.0)) throw DomainError("penalty integral with negative lower limit");
    if (!(lo <= hi)) throw DomainError("penalty integral with lower limit above upper limit");
    if (lo == hi) return 0.0;
    return std::visit(
        [lo, hi](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, LinearPenalty>) {
            return 0.5 * p.a * (hi - lo) * (hi + lo);
          } else if constexpr (std::is_same_v<T, PowerPenalty>) {
            const double e = p.n + 1.0;
            return p.a * (std::pow(hi, e) - std::pow(lo, e)) / e;
          } else if constexpr (std::is_same_v<T, FloorPenalty>) {
            return floor_integral(p.a, lo, hi);
          } else {
            return ou_integral(p.params, lo, hi);
          }
        },
        penalty_);
  }

  /// Same integral computed by adaptive Simpson on eval(); an independent route.
  double integral_quadrature(double lo, double hi, double abs_tol = 1e-9) const {
    if (!(lo >= 0.0) || !(lo <= hi)) throw DomainError("invalid integration interval");
    return integrate_adaptive([this](double t) { return eval(t); }, lo, hi, abs_tol);
  }

  PenaltyBounds bounds() const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (const auto* ou = std::get_if<OuMmsePenalty>(&penalty_)) {
      return {0.0, ou_constants(ou->params).n_bar};
    }
    return {eval(0.0), inf};
  }

  bool is_bounded() const { return std::isfinite(bounds().p_upper); }

  /// Smallest n with p(d) = O(d^n), or +inf when no polynomial bound is known.
  double polynomial_order() const {
    return std::visit(
        [](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, PowerPenalty>) {
            return p.n;
          } else if constexpr (std::is_same_v<T, OuMmsePenalty>) {
            return 0.0;
          } else {
            return 1.0;
          }
        },
        penalty_);
  }

 private:
  explicit AgePenalty(Variant v) : penalty_(std::move(v)) {}

  // Exact piecewise-constant sum of floor(a t) over [lo, hi].
  static double floor_integral(double a, double lo, double hi) {
    const double u = a * lo;
    const double v = a * hi;
    const double ku = std::floor(u);
    const double kv = std::floor(v);
    if (ku == kv) return ku * (hi - lo);
    const double head = ku * (ku + 1.0 - u);
    const double middle = 0.5 * (kv - 1.0 - ku) * (kv + ku);
    const double tail = kv * (v - kv);
    return (head + middle + tail) / a;
  }

  static double ou_integral(const OuParams& params, double lo, double hi) {
    if (params.h == 0.0) {
      const double n_bar = params.sigma * params.sigma / (2.0 * params.theta);
      const double k = 2.0 * params.theta;
      // n_bar (hi - lo) - n_bar (e^{-k lo} - e^{-k hi}) / k
      return n_bar * ((hi - lo) - std::exp(-k * lo) * -std::expm1(-k * (hi - lo)) / k);
    }
    const OuConstants k = ou_constants(params);
    const double ratio = k.l / k.c;
    // antiderivative of 1 / (l + c e^{rate t}) is -ln(c + l e^{-rate t}) / (l rate)
    const double log_term = std::log1p(ratio * std::exp(-k.rate * hi)) - std::log1p(ratio * std::exp(-k.rate * lo));
    return k.n_bar * (hi - lo) + log_term / (k.l * k.rate);
  }

  Variant penalty_;
};

inline double eval(const AgePenalty& p, double delta) { return p.eval(delta); }
inline double integral(const AgePenalty& p, double lo, double hi) { return p.integral(lo, hi); }
inline PenaltyBounds penalty_bounds(const AgePenalty& p) { return p.bounds(); }

enum class AssumptionCondition { Bounded, PolynomialWithMoment, SubexponentialBoundedDelay, Unverified };

inline const char* to_string(AssumptionCondition c) {
  switch (c) {
    case AssumptionCondition::Bounded:
      return "bounded";
    case AssumptionCondition::PolynomialWithMoment:
      return "polynomial-with-moment";
    case AssumptionCondition::SubexponentialBoundedDelay:
      return "subexponential-bounded-delay";
    case AssumptionCondition::Unverified:
      return "unverified";
  }
  return "unverified";
}

struct AssumptionReport {
  bool satisfied;
  AssumptionCondition condition;
  std::string detail;
};

/// Checks the structural sufficient conditions for the contraction assumption
/// behind the threshold policy's optimality. Can certify, never refute: when no
/// condition applies the verdict is "unverified", not "violated".
inline AssumptionReport classify_assumption(const AgePenalty& p, const ChannelModel& channel, double zbar) {
  std::string note = channel.alpha == 0.0 ? "alpha = 0: assumption is vacuous for an error-free forward channel; "
                                          : std::string{};
  if (std::isfinite(zbar)) note += "zbar=" + detail::format_number(zbar) + "; ";
  const bool vacuous = channel.alpha == 0.0;

  if (p.is_bounded()) {
    return {true, AssumptionCondition::Bounded, note + "penalty bounded by " + detail::format_number(p.bounds().p_upper)};
  }
  const double order = p.polynomial_order();
  if (std::isfinite(order) && channel.forward.has_finite_moment(order + 1.0)) {
    return {true, AssumptionCondition::PolynomialWithMoment,
            note + "p = O(d^" + detail::format_number(order) + ") and E[Y^" + detail::format_number(order + 1.0) +
                "] < inf"};
  }
  // Every polynomially bounded penalty has a sub-exponential integral.
  if (std::isfinite(order) && std::isfinite(channel.forward.support_sup())) {
    return {true, AssumptionCondition::SubexponentialBoundedDelay, note + "sub-exponential integral, bounded Y"};
  }
  return {vacuous, AssumptionCondition::Unverified, note + "no sufficient condition applies"};
}

}  // namespace aoi

#endif  // AOI_PENALTY_HPP
