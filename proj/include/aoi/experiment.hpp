#ifndef AOI_EXPERIMENT_HPP
#define AOI_EXPERIMENT_HPP

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aoi/channel.hpp"
#include "aoi/distributions.hpp"
#include "aoi/epoch_model.hpp"
#include "aoi/parallel.hpp"
#include "aoi/penalty.hpp"
#include "aoi/simulator.hpp"
#include "aoi/solver.hpp"

namespace aoi {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitSolver = 3, kExitCheck = 4 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat key/value settings; keys are the long CLI flag names without dashes.
using Settings = std::map<std::string, std::string>;

/// Reads `key = value` lines; '#' starts a comment, blank lines are ignored.
inline Settings read_settings_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  Settings s;
  std::string line;
  int lineno = 0;
  const auto trim = [](std::string t) {
    const auto b = t.find_first_not_of(" \t\r");
    const auto e = t.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : t.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    s[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return s;
}

enum class SweepParam { Sigma1, Sigma2, Alpha };

inline const char* to_string(SweepParam p) {
  switch (p) {
    case SweepParam::Sigma1:
      return "sigma1";
    case SweepParam::Sigma2:
      return "sigma2";
    case SweepParam::Alpha:
      return "alpha";
  }
  return "?";
}

/// 8 evenly spaced sigmas over [0.3, 1.8], or alphas with 1/(1-alpha) evenly
/// spaced over [2, 10].
inline std::vector<double> default_grid(SweepParam p) {
  std::vector<double> grid;
  for (int k = 0; k < 8; ++k) {
    if (p == SweepParam::Alpha) {
      const double attempts = 2.0 + 8.0 * k / 7.0;
      grid.push_back(1.0 - 1.0 / attempts);
    } else {
      grid.push_back(0.3 + 1.5 * k / 7.0);
    }
  }
  return grid;
}

struct ExperimentConfig {
  std::string forward = "lognormal:1.5";
  std::string backward = "lognormal:1.5";
  double alpha = 0.8;
  std::string penalty = "linear:2";
  SolverConfig solver{};
  std::uint64_t epochs = 1000000;
  std::uint64_t seed = 1;
  std::optional<SweepParam> sweep;
  std::vector<double> grid;
  std::string out;
  std::string trace;
  std::string policy = "all";
  bool json = false;
  unsigned workers = default_workers();
  std::optional<double> zbar;
  std::set<std::string> explicit_keys;

  ChannelModel channel() const {
    return {alpha, DelayDistribution::parse(forward), DelayDistribution::parse(backward)};
  }
  AgePenalty age_penalty() const { return AgePenalty::parse(penalty); }

  /// Channel for one sweep point. Parameters not given explicitly default to
  /// the reference setup: sigma sweeps at (sigma, 1.5, alpha 0.8), the alpha
  /// sweep at (1.5, 2.3).
  ChannelModel sweep_channel(double value) const {
    const auto pick = [&](const char* key, const std::string& given, const std::string& fallback) {
      return explicit_keys.count(key) ? given : fallback;
    };
    std::string fwd = forward;
    std::string bwd = backward;
    double a = alpha;
    switch (*sweep) {
      case SweepParam::Sigma1:
        fwd = "lognormal:" + detail::format_number(value);
        bwd = pick("backward", backward, "lognormal:1.5");
        a = explicit_keys.count("alpha") ? alpha : 0.8;
        break;
      case SweepParam::Sigma2:
        fwd = pick("forward", forward, "lognormal:1.5");
        bwd = "lognormal:" + detail::format_number(value);
        a = explicit_keys.count("alpha") ? alpha : 0.8;
        break;
      case SweepParam::Alpha:
        fwd = pick("forward", forward, "lognormal:1.5");
        bwd = pick("backward", backward, "lognormal:2.3");
        a = value;
        break;
    }
    return {a, DelayDistribution::parse(fwd), DelayDistribution::parse(bwd)};
  }
};

namespace detail {

inline std::uint64_t parse_count(const std::string& key, const std::string& text) {
  const double v = parse_number(text, key);
  if (!(v >= 0.0) || v != std::floor(v) || v > 1.8e19) throw ConfigError(key + " must be a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text.empty()) return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key + " must be true or false");
}

}  // namespace detail

/// Validates settings into a config. Every invariant violation is reported as
/// ConfigError naming the offending key.
inline ExperimentConfig make_config(const Settings& settings) {
  static const std::set<std::string> known = {"forward", "backward", "alpha",  "penalty", "epochs",
                                              "samples", "seed",     "tol-beta", "tol-b", "out",
                                              "trace",   "param",    "grid",   "policy",  "json",
                                              "workers", "zbar",    "allow-unverified-assumption"};
  ExperimentConfig cfg;
  try {
    for (const auto& [key, value] : settings) {
      if (!known.count(key)) throw ConfigError("unknown setting '" + key + "'");
      cfg.explicit_keys.insert(key);
      if (key == "forward") {
        cfg.forward = value;
      } else if (key == "backward") {
        cfg.backward = value;
      } else if (key == "alpha") {
        cfg.alpha = detail::parse_number(value, key);
      } else if (key == "penalty") {
        cfg.penalty = value;
      } else if (key == "epochs") {
        cfg.epochs = detail::parse_count(key, value);
      } else if (key == "samples") {
        cfg.solver.mc.samples = detail::parse_count(key, value);
      } else if (key == "seed") {
        cfg.seed = detail::parse_count(key, value);
      } else if (key == "tol-beta") {
        cfg.solver.tol_beta = detail::parse_number(value, key);
      } else if (key == "tol-b") {
        cfg.solver.tol_b = detail::parse_number(value, key);
      } else if (key == "out") {
        cfg.out = value;
      } else if (key == "trace") {
        cfg.trace = value;
      } else if (key == "policy") {
        cfg.policy = value;
      } else if (key == "json") {
        cfg.json = detail::parse_bool(key, value);
      } else if (key == "workers") {
        cfg.workers = static_cast<unsigned>(std::max<std::uint64_t>(1, detail::parse_count(key, value)));
      } else if (key == "zbar") {
        cfg.zbar = detail::parse_number(value, key);
        if (!(*cfg.zbar >= 0.0)) throw ConfigError("zbar must be >= 0");
      } else if (key == "allow-unverified-assumption") {
        cfg.solver.allow_unverified_assumption = detail::parse_bool(key, value);
      } else if (key == "param") {
        if (value == "sigma1") {
          cfg.sweep = SweepParam::Sigma1;
        } else if (value == "sigma2") {
          cfg.sweep = SweepParam::Sigma2;
        } else if (value == "alpha") {
          cfg.sweep = SweepParam::Alpha;
        } else {
          throw ConfigError("param must be one of sigma1, sigma2, alpha");
        }
      } else if (key == "grid") {
        for (std::string_view item : detail::split(value, ',')) cfg.grid.push_back(detail::parse_number(item, key));
      }
    }
    cfg.solver.mc.seed = cfg.seed;
    if (cfg.policy != "all" && !parse_policy(cfg.policy)) {
      throw ConfigError("policy must be 'all' or one of optimal, zero-wait, 1-way, 2-wayEF, 1-wayEF");
    }
    if (cfg.epochs < 100) throw ConfigError("epochs must be >= 100");
    if (cfg.solver.mc.samples < 1) throw ConfigError("samples must be >= 1");
    cfg.solver.validate();
    cfg.channel();
    cfg.age_penalty();
    if (cfg.sweep) {
      if (cfg.grid.empty()) cfg.grid = default_grid(*cfg.sweep);
      for (std::size_t i = 1; i < cfg.grid.size(); ++i) {
        if (!(cfg.grid[i] > cfg.grid[i - 1])) throw ConfigError("grid must be strictly increasing");
      }
      for (double v : cfg.grid) cfg.sweep_channel(v);
    } else if (!cfg.grid.empty()) {
      throw ConfigError("grid given without param");
    }
  } catch (const InvalidParameter& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

/// Six significant digits.
inline std::string format_sig6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct SweepRow {
  SweepParam param;
  double value = 0.0;
  std::optional<double> beta;
  std::optional<double> b;
  std::map<std::string, BaselineOutcome> outcomes;

  bool all_ok() const {
    if (!beta) return false;
    for (const auto& [name, o] : outcomes) {
      if (!o.ok()) return false;
    }
    return outcomes.size() == kAllPolicies.size();
  }
};

inline constexpr const char* kSweepHeader =
    "param,value,beta,b,opt_avg,opt_se,zw_avg,zw_se,oneway_avg,oneway_se,twowayef_avg,twowayef_se,onewayef_avg,"
    "onewayef_se";

inline SweepRow run_sweep_point(const ExperimentConfig& cfg, double value) {
  SweepRow row;
  row.param = *cfg.sweep;
  row.value = value;
  const ChannelModel channel = cfg.sweep_channel(value);
  row.outcomes = run_all_baselines(channel, cfg.age_penalty(), cfg.epochs, cfg.seed, cfg.solver);
  const BaselineOutcome& opt = row.outcomes.at(policy_name(PolicyKind::Optimal));
  if (opt.policy && opt.policy->solved) {
    row.beta = opt.policy->solved->beta;
    row.b = opt.policy->solved->b;
  }
  return row;
}

/// One row per grid point, evaluated on a bounded worker pool and returned in
/// grid order.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg) {
  if (!cfg.sweep) throw ConfigError("sweep needs --param");
  std::vector<SweepRow> rows(cfg.grid.size());
  parallel_for(cfg.grid.size(), cfg.workers, [&](std::size_t i) { rows[i] = run_sweep_point(cfg, cfg.grid[i]); });
  return rows;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << kSweepHeader << '\n';
  const auto cell = [](const std::optional<double>& v) { return v ? format_sig6(*v) : std::string("failed"); };
  for (const SweepRow& row : rows) {
    out << to_string(row.param) << ',' << format_sig6(row.value) << ',' << cell(row.beta) << ',' << cell(row.b);
    for (PolicyKind kind : kAllPolicies) {
      const auto it = row.outcomes.find(policy_name(kind));
      if (it != row.outcomes.end() && it->second.ok()) {
        out << ',' << format_sig6(it->second.result->avg_penalty) << ',' << format_sig6(it->second.result->std_err);
      } else {
        out << ",failed,failed";
      }
    }
    out << '\n';
  }
}

inline nlohmann::ordered_json solve_report_json(const OptimalPolicy& policy, const ZeroWaitVerdict& zw) {
  nlohmann::ordered_json j;
  j["beta"] = policy.beta;
  j["b"] = policy.b;
  j["bracket_lo"] = policy.bracket_lo;
  j["bracket_hi"] = policy.bracket_hi;
  j["zero_wait_optimal"] = zw.optimal;
  j["margin"] = zw.margin;
  return j;
}

inline int cmd_solve(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const ChannelModel channel = cfg.channel();
  const AgePenalty penalty = cfg.age_penalty();
  const AssumptionReport assumption =
      classify_assumption(penalty, channel, cfg.zbar.value_or(std::numeric_limits<double>::infinity()));
  if (!assumption.satisfied) {
    err << "warning: assumption " << to_string(assumption.condition) << ": " << assumption.detail << '\n';
  }
  try {
    const Solver solver(channel, penalty, cfg.solver);
    const OptimalPolicy policy = solver.solve();
    const ZeroWaitVerdict zw = solver.zero_wait();
    auto report = solve_report_json(policy, zw);
    if (cfg.zbar) report["zbar_feasible"] = solver.feasible(*cfg.zbar);
    if (cfg.json) {
      out << report.dump(2) << '\n';
    } else {
      out << "channel: " << channel.describe() << '\n'
          << "penalty: " << penalty.to_string() << '\n'
          << "pool: " << solver.pool().size() << (solver.pool().exact() ? " exact scenarios" : " samples") << '\n'
          << "beta=" << format_sig6(policy.beta) << " (s.e. " << format_sig6(policy.beta_std_err) << ")\n"
          << "b=" << format_sig6(policy.b) << '\n'
          << "bracket=[" << format_sig6(policy.bracket_lo) << ", " << format_sig6(policy.bracket_hi) << "]\n"
          << "assumption=" << (assumption.satisfied ? "satisfied" : "unverified") << " ("
          << to_string(assumption.condition) << ")\n"
          << "zero-wait-optimal=" << (zw.optimal ? "true" : "false") << " margin=" << format_sig6(zw.margin)
          << " (s.e. " << format_sig6(zw.std_err) << ")\n";
      if (cfg.zbar) {
        out << "zbar=" << format_sig6(*cfg.zbar) << " feasible=" << (report["zbar_feasible"].get<bool>() ? "true" : "false")
            << '\n';
      }
    }
    if (!cfg.out.empty()) {
      std::ofstream file(cfg.out);
      if (!file) throw ConfigError("cannot write '" + cfg.out + "'");
      file << report.dump(2) << '\n';
    }
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << '\n';
    return kExitSolver;
  }
  return kExitOk;
}

inline int cmd_simulate(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const ChannelModel channel = cfg.channel();
  const AgePenalty penalty = cfg.age_penalty();
  std::vector<PolicyKind> kinds;
  if (cfg.policy == "all") {
    kinds.assign(kAllPolicies.begin(), kAllPolicies.end());
  } else {
    kinds.push_back(*parse_policy(cfg.policy));
  }
  int code = kExitOk;
  out << "policy,avg,se,epochs,total_time\n";
  for (PolicyKind kind : kinds) {
    try {
      const Policy policy = Policy::solve(kind, channel, penalty, cfg.solver);
      SimTrace trace;
      const bool want_trace = !cfg.trace.empty() && kinds.size() == 1;
      const SimResult r = run(policy, channel, penalty, cfg.epochs, cfg.seed, want_trace ? &trace : nullptr);
      out << policy_name(kind) << ',' << format_sig6(r.avg_penalty) << ',' << format_sig6(r.std_err) << ','
          << r.epochs << ',' << format_sig6(r.total_time) << '\n';
      if (want_trace) {
        std::ofstream file(cfg.trace);
        if (!file) throw ConfigError("cannot write '" + cfg.trace + "'");
        trace.write_csv(file);
      }
    } catch (const SolverError& e) {
      out << policy_name(kind) << ",failed,failed,0,0\n";
      err << policy_name(kind) << ": solver error: " << e.what() << '\n';
      code = kExitSolver;
    }
  }
  if (!cfg.trace.empty() && kinds.size() != 1) err << "note: --trace needs a single --policy; no trace written\n";
  return code;
}

inline int cmd_sweep(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const std::vector<SweepRow> rows = run_sweep(cfg);
  int code = kExitOk;
  for (const SweepRow& row : rows) {
    for (const auto& [name, o] : row.outcomes) {
      if (!o.ok()) {
        err << to_string(row.param) << "=" << format_sig6(row.value) << " " << name << ": " << o.error << '\n';
        code = kExitSolver;
      }
    }
  }
  if (cfg.out.empty()) {
    write_sweep_csv(rows, out);
  } else {
    std::ofstream file(cfg.out);
    if (!file) throw ConfigError("cannot write '" + cfg.out + "'");
    write_sweep_csv(rows, file);
    out << "wrote " << rows.size() << " rows to " << cfg.out << '\n';
  }
  return code;
}

struct CheckOutcome {
  std::string name;
  bool passed;
  std::string detail;
};

/// Validation suite on the configured channel/penalty: the Wald identity, the
/// shape of f(beta), the Q >= J probe and the Riccati oracle.
inline std::vector<CheckOutcome> run_checks(const ExperimentConfig& cfg) {
  const ChannelModel channel = cfg.channel();
  const AgePenalty penalty = cfg.age_penalty();
  const Solver solver(channel, penalty, cfg.solver);
  const DrawPool& pool = solver.pool();
  std::vector<CheckOutcome> results;

  {
    const Estimate total = pool.estimate([&](std::size_t i) {
      const EpochDraw& e = pool.draw(i);
      double s = e.x1;
      for (double x : e.xs) s += x;
      for (double y : e.ys) s += y;
      return s;
    });
    const double expected = (channel.forward.mean() + channel.backward.mean()) / (1.0 - channel.alpha);
    const double gap = std::abs(total.value - expected);
    const bool ok = gap <= 4.0 * total.std_err + 1e-9 * expected;
    results.push_back({"wald", ok,
                       "E[sum(X+Y)]=" + format_sig6(total.value) + " expected " + format_sig6(expected) +
                           " (s.e. " + format_sig6(total.std_err) + ")"});
  }

  std::optional<OptimalPolicy> solved;
  try {
    solved = solver.solve();
    results.push_back({"solve", true, "beta=" + format_sig6(solved->beta) + " b=" + format_sig6(solved->b)});
  } catch (const SolverError& e) {
    results.push_back({"solve", false, e.what()});
  }

  if (solved) {
    const OptimalPolicy& policy = *solved;
    const double lo = penalty.bounds().p_lower + 1e-9;
    double hi = lo + 2.0 * (policy.beta - lo);
    if (penalty.is_bounded()) hi = std::min(hi, 0.5 * (policy.beta + penalty.bounds().p_upper));
    constexpr int kPoints = 20;
    double prev = std::numeric_limits<double>::infinity();
    bool monotone = true;
    int sign_changes = 0;
    bool prev_positive = true;
    for (int k = 0; k < kPoints; ++k) {
      const double beta = lo + (hi - lo) * k / (kPoints - 1);
      const double f = solver.f(beta).f;
      if (f > prev) monotone = false;
      const bool positive = f > 0.0;
      if (k > 0 && positive != prev_positive) ++sign_changes;
      prev_positive = positive;
      prev = f;
    }
    results.push_back({"f-beta", monotone && sign_changes == 1,
                       std::string(monotone ? "non-increasing" : "NOT monotone") + ", " +
                           std::to_string(sign_changes) + " sign change(s) on " + std::to_string(kPoints) +
                           " points"});

    RandomSource rng(cfg.seed, 0x71676170ULL);
    const double scale = std::max(1.0, policy.b + channel.forward.mean() + channel.backward.mean());
    double worst = 0.0;
    bool exact_at_mu = true;
    for (int k = 0; k < 100; ++k) {
      const double delta = 2.0 * scale * rng.uniform();
      const double x = scale * rng.uniform();
      const double z = 2.0 * scale * rng.uniform();
      const Estimate gap = solver.q_gap(policy, delta, x, z);
      worst = std::max(worst, -(gap.value + 3.0 * gap.std_err) - 1e-9 * std::abs(policy.beta) * scale);
      if (solver.q_gap(policy, delta, x, policy.wait(delta, x)).value != 0.0) exact_at_mu = false;
    }
    results.push_back({"q-gap", worst <= 0.0 && exact_at_mu,
                       "max violation beyond 3 s.e. " + format_sig6(std::max(worst, 0.0)) +
                           (exact_at_mu ? ", exactly 0 at z=mu" : ", NONZERO at z=mu")});
  }

  {
    OuParams params{1.0, 1.0, 1.0, 1.0};
    if (const auto* ou = std::get_if<OuMmsePenalty>(&penalty.variant())) params = ou->params;
    double max_err = 0.0;
    for (int k = 0; k <= 1000; ++k) {
      const double delta = 0.01 * k;
      max_err = std::max(max_err, std::abs(ou_mmse_closed(delta, params) - ou_mmse_numeric(delta, params, 1e-3)));
    }
    results.push_back({"riccati", max_err <= 1e-8, "max |closed - RK4| = " + format_sig6(max_err)});
  }
  return results;
}

inline int cmd_check(const ExperimentConfig& cfg, std::ostream& out) {
  bool all = true;
  for (const CheckOutcome& c : run_checks(cfg)) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    all = all && c.passed;
  }
  return all ? kExitOk : kExitCheck;
}

}  // namespace aoi

#endif  // AOI_EXPERIMENT_HPP
