#ifndef AOI_DISTRIBUTIONS_HPP
#define AOI_DISTRIBUTIONS_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "aoi/error.hpp"
#include "aoi/random.hpp"

namespace aoi {

namespace detail {

inline double parse_number(std::string_view text, std::string_view what) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || text.empty()) {
    throw InvalidParameter(std::string(what) + ": cannot parse number '" + std::string(text) + "'");
  }
  return value;
}

inline std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

// Shortest round-trippable text for a double.
inline std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace detail

struct Atom {
  double time;
  double prob;
};

struct ConstantDelay {
  double value;
};

/// exp(sigma * Z), Z standard normal.
struct LognormalDelay {
  double sigma;
};

struct ExponentialDelay {
  double mean;
};

struct EmpiricalDelay {
  std::vector<Atom> atoms;
  std::vector<double> cumulative;
};

/// Nonnegative i.i.d. delay law used for forward (Y) and backward (X) delays.
/// Immutable; every constructor validates its parameters.
class DelayDistribution {
 public:
  using Variant = std::variant<ConstantDelay, LognormalDelay, ExponentialDelay, EmpiricalDelay>;

  static DelayDistribution constant(double value) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
      throw InvalidParameter("constant delay must be finite and >= 0");
    }
    return DelayDistribution(ConstantDelay{value});
  }

  static DelayDistribution lognormal(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidParameter("lognormal sigma must be > 0");
    return DelayDistribution(LognormalDelay{sigma});
  }

  static DelayDistribution exponential(double mean) {
    if (!(mean > 0.0) || !std::isfinite(mean)) throw InvalidParameter("exponential mean must be > 0");
    return DelayDistribution(ExponentialDelay{mean});
  }

  static DelayDistribution empirical(std::vector<Atom> atoms) {
    if (atoms.empty()) throw InvalidParameter("empirical delay needs at least one atom");
    EmpiricalDelay d;
    double total = 0.0;
    for (const Atom& a : atoms) {
      if (!(a.time >= 0.0) || !std::isfinite(a.time)) throw InvalidParameter("empirical atom time must be >= 0");
      if (!(a.prob > 0.0) || a.prob > 1.0) throw InvalidParameter("empirical atom probability must be in (0, 1]");
      total += a.prob;
      d.cumulative.push_back(total);
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidParameter("empirical probabilities must sum to 1");
    d.cumulative.back() = 1.0;
    d.atoms = std::move(atoms);
    return DelayDistribution(std::move(d));
  }

  /// Grammar: constant:<v> | lognormal:<sigma> | exponential:<mean> |
  /// empirical:<t1>:<p1>,<t2>:<p2>,...
  static DelayDistribution parse(std::string_view spec) {
    const std::size_t colon = spec.find(':');
    if (colon == std::string_view::npos) throw InvalidParameter("delay spec '" + std::string(spec) + "' lacks ':'");
    const std::string_view kind = spec.substr(0, colon);
    const std::string_view rest = spec.substr(colon + 1);
    if (kind == "constant") return constant(detail::parse_number(rest, "constant"));
    if (kind == "lognormal") return lognormal(detail::parse_number(rest, "lognormal"));
    if (kind == "exponential") return exponential(detail::parse_number(rest, "exponential"));
    if (kind == "empirical") {
      std::vector<Atom> atoms;
      for (std::string_view item : detail::split(rest, ',')) {
        const auto fields = detail::split(item, ':');
        if (fields.size() != 2) throw InvalidParameter("empirical atom '" + std::string(item) + "' is not t:p");
        atoms.push_back({detail::parse_number(fields[0], "empirical time"),
                         detail::parse_number(fields[1], "empirical probability")});
      }
      return empirical(std::move(atoms));
    }
    throw InvalidParameter("unknown delay family '" + std::string(kind) + "'");
  }

  std::string to_string() const {
    return std::visit(
        [](const auto& d) -> std::string {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ConstantDelay>) {
            return "constant:" + detail::format_number(d.value);
          } else if constexpr (std::is_same_v<T, LognormalDelay>) {
            return "lognormal:" + detail::format_number(d.sigma);
          } else if constexpr (std::is_same_v<T, ExponentialDelay>) {
            return "exponential:" + detail::format_number(d.mean);
          } else {
            std::string out = "empirical:";
            for (std::size_t i = 0; i < d.atoms.size(); ++i) {
              if (i) out += ',';
              out += detail::format_number(d.atoms[i].time) + ":" + detail::format_number(d.atoms[i].prob);
            }
            return out;
          }
        },
        dist_);
  }

  const Variant& variant() const { return dist_; }

  double draw(RandomSource& rng) const {
    return std::visit(
        [&rng](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ConstantDelay>) {
            return d.value;
          } else if constexpr (std::is_same_v<T, LognormalDelay>) {
            return std::exp(d.sigma * rng.normal());
          } else if constexpr (std::is_same_v<T, ExponentialDelay>) {
            return -d.mean * std::log(rng.uniform());
          } else {
            const double u = rng.uniform();
            const auto it = std::lower_bound(d.cumulative.begin(), d.cumulative.end(), u);
            return d.atoms[static_cast<std::size_t>(it - d.cumulative.begin())].time;
          }
        },
        dist_);
  }

  double mean() const {
    return std::visit(
        [](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ConstantDelay>) {
            return d.value;
          } else if constexpr (std::is_same_v<T, LognormalDelay>) {
            return std::exp(0.5 * d.sigma * d.sigma);
          } else if constexpr (std::is_same_v<T, ExponentialDelay>) {
            return d.mean;
          } else {
            double m = 0.0;
            for (const Atom& a : d.atoms) m += a.time * a.prob;
            return m;
          }
        },
        dist_);
  }

  /// Essential infimum: largest t with P(draw < t) = 0.
  double support_inf() const {
    return std::visit(
        [](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ConstantDelay>) {
            return d.value;
          } else if constexpr (std::is_same_v<T, EmpiricalDelay>) {
            double lo = std::numeric_limits<double>::infinity();
            for (const Atom& a : d.atoms) lo = std::min(lo, a.time);
            return lo;
          } else {
            return 0.0;
          }
        },
        dist_);
  }

  /// Essential supremum; +inf for unbounded families.
  double support_sup() const {
    return std::visit(
        [](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ConstantDelay>) {
            return d.value;
          } else if constexpr (std::is_same_v<T, EmpiricalDelay>) {
            double hi = 0.0;
            for (const Atom& a : d.atoms) hi = std::max(hi, a.time);
            return hi;
          } else {
            return std::numeric_limits<double>::infinity();
          }
        },
        dist_);
  }

  /// E[draw^k] < inf. Every supported family has all moments.
  bool has_finite_moment(double k) const { return k >= 0.0; }

  bool is_discrete() const {
    return std::holds_alternative<ConstantDelay>(dist_) || std::holds_alternative<EmpiricalDelay>(dist_);
  }

  /// Support points with probabilities; only meaningful when is_discrete().
  std::vector<Atom> atoms() const {
    if (const auto* c = std::get_if<ConstantDelay>(&dist_)) return {{c->value, 1.0}};
    if (const auto* e = std::get_if<EmpiricalDelay>(&dist_)) return e->atoms;
    return {};
  }

 private:
  explicit DelayDistribution(Variant v) : dist_(std::move(v)) {}

  Variant dist_;
};

inline double draw(const DelayDistribution& dist, RandomSource& rng) { return dist.draw(rng); }
inline double mean(const DelayDistribution& dist) { return dist.mean(); }
inline double support_inf(const DelayDistribution& dist) { return dist.support_inf(); }

inline void validate_failure_probability(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw InvalidParameter("failure probability alpha must satisfy 0 <= alpha < 1 (got " +
                           detail::format_number(alpha) + ")");
  }
}

/// Number of attempts until the first success: P(M = m) = alpha^(m-1) (1 - alpha).
inline std::uint32_t draw_retry_count(double alpha, RandomSource& rng) {
  validate_failure_probability(alpha);
  const double u = rng.uniform();
  if (alpha == 0.0) return 1;
  // P(M > m) = alpha^m = P(u <= alpha^m)
  const double tail = std::floor(std::log(u) / std::log(alpha));
  if (tail >= static_cast<double>(std::numeric_limits<std::uint32_t>::max() - 1)) {
    return std::numeric_limits<std::uint32_t>::max();
  }
  return 1u + static_cast<std::uint32_t>(tail);
}

}  // namespace aoi

#endif  // AOI_DISTRIBUTIONS_HPP
