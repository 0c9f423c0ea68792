#ifndef AOI_CLI_HPP
#define AOI_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aoi/experiment.hpp"

namespace aoi {

namespace detail {

struct CliOptions {
  std::string command;
  std::string config_path;
  Settings flags;
};

inline void add_common_options(CLI::App& sub, CliOptions& opts) {
  static const std::vector<std::pair<std::string, std::string>> valued = {
      {"forward", "forward delay Y, e.g. lognormal:1.5, constant:1, exponential:2, empirical:1:0.5,2:0.5"},
      {"backward", "backward delay X, same grammar as --forward"},
      {"alpha", "per-attempt failure probability in [0, 1)"},
      {"penalty", "age penalty: linear:a, power:a:n, floor:a, ou:theta:sigma:h:r"},
      {"epochs", "simulated epochs per policy"},
      {"samples", "Monte-Carlo pool size for the solver"},
      {"seed", "random seed"},
      {"tol-beta", "outer bisection tolerance"},
      {"tol-b", "threshold bisection tolerance"},
      {"out", "output path (CSV for sweep, JSON for solve)"},
      {"trace", "event trace CSV (simulate with a single --policy)"},
      {"param", "sweep parameter: sigma1, sigma2 or alpha"},
      {"grid", "comma-separated strictly increasing sweep values"},
      {"policy", "all, optimal, zero-wait, 1-way, 2-wayEF or 1-wayEF"},
      {"workers", "sweep worker threads"},
      {"zbar", "waiting bound to test for feasibility"},
  };
  sub.add_option("--config", opts.config_path, "key = value settings file; flags override it");
  for (const auto& [key, help] : valued) {
    sub.add_option_function<std::string>(
        "--" + key, [&opts, key = key](const std::string& v) { opts.flags[key] = v; }, help);
  }
  sub.add_flag_function(
      "--json", [&opts](std::int64_t) { opts.flags["json"] = "true"; }, "print the solve report as JSON");
  sub.add_flag_function(
      "--allow-unverified-assumption", [&opts](std::int64_t) { opts.flags["allow-unverified-assumption"] = "true"; },
      "solve even when the penalty/channel pair cannot be certified");
}

}  // namespace detail

/// Entry point of the aoi-sampler tool. Returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optimal sampling for age of information over an unreliable two-way delay channel"};
  app.require_subcommand(1);
  detail::CliOptions opts;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"solve", "compute the optimal threshold policy"},
      {"simulate", "simulate the optimal policy and the baselines"},
      {"sweep", "sweep sigma1, sigma2 or alpha and write CSV"},
      {"check", "run the validation suite on a configuration"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    detail::add_common_options(*sub, opts);
    sub->callback([&opts, name = name] { opts.command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  ExperimentConfig cfg;
  try {
    Settings settings;
    if (!opts.config_path.empty()) settings = read_settings_file(opts.config_path);
    for (const auto& [key, value] : opts.flags) settings[key] = value;
    cfg = make_config(settings);
    if (opts.command == "sweep" && !cfg.sweep) throw ConfigError("sweep needs --param sigma1|sigma2|alpha");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (opts.command == "solve") return cmd_solve(cfg, out, err);
    if (opts.command == "simulate") return cmd_simulate(cfg, out, err);
    if (opts.command == "sweep") return cmd_sweep(cfg, out, err);
    return cmd_check(cfg, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitSolver;
  }
}

}  // namespace aoi

#endif  // AOI_CLI_HPP
