#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "optex/config.hpp"
#include "optex/diagnostics.hpp"
#include "optex/experiment.hpp"

namespace {

using namespace optex;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;
constexpr int kGateFailure = 3;

// diag-only knobs live under "diag."; everything else goes to the run config.
struct DiagOptions {
  std::map<std::string, std::string> values;
  std::vector<std::string> config_overrides;

  double num(const std::string& key, double fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected a number, got '" + it->second + "'");
    }
  }
  int integer(const std::string& key, int fallback) const {
    const double v = num(key, fallback);
    if (v != std::floor(v)) throw ConfigError(key + ": expected an integer");
    return static_cast<int>(v);
  }
};

DiagOptions split_diag_overrides(const std::vector<std::string>& sets) {
  static const std::vector<std::string> known = {"diag.seed",  "diag.instances", "diag.trials",
                                                 "diag.sigma2", "diag.dim",      "diag.threads"};
  DiagOptions o;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + s + "' is not key=value");
    const std::string key = s.substr(0, eq);
    if (key.rfind("diag.", 0) == 0) {
      if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown diag key '" + key + "'");
      o.values[key] = s.substr(eq + 1);
    } else {
      o.config_overrides.push_back(s);
    }
  }
  return o;
}

const char* verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

int diag_prop1(const DiagOptions& o) {
  const auto r = diag::check_decoupled_vs_oracle(o.integer("diag.instances", 100), o.integer("diag.seed", 0));
  std::cout << "instances,worst_mean_rel,worst_var_rel\n"
            << r.instances << ',' << format_number(r.worst_mean_rel) << ',' << format_number(r.worst_var_rel) << '\n';
  std::cout << "prop1: " << verdict(r.passed()) << " (tolerance " << r.tolerance << ")\n";
  return r.passed() ? kOk : kGateFailure;
}

int diag_variance(const DiagOptions& o) {
  diag::VarianceCheckConfig c;
  c.sequences = o.integer("diag.instances", c.sequences);
  c.seed = static_cast<std::uint64_t>(o.integer("diag.seed", 0));
  const auto r = diag::check_variance_properties(c);
  std::cout << "sequences,checks,non_increasing_violations,lower_bound_violations,prior_bound_violations,"
               "envelope_violations\n"
            << r.sequences << ',' << r.checks << ',' << r.non_increasing_violations << ','
            << r.lower_bound_violations << ',' << r.prior_bound_violations << ',' << r.envelope_violations << '\n';
  std::cout << "variance: " << verdict(r.passed()) << '\n';
  return r.passed() ? kOk : kGateFailure;
}

int diag_infogain(const DiagOptions& o) {
  const auto r = diag::check_information_gain(o.integer("diag.instances", 50), o.integer("diag.seed", 0));
  std::cout << "instances,worst_rel\n" << r.instances << ',' << format_number(r.worst_rel) << '\n';
  std::cout << "infogain: " << verdict(r.passed()) << " (tolerance " << r.tolerance << ")\n";
  return r.passed() ? kOk : kGateFailure;
}

int diag_error_vs_t0(const DiagOptions& o) {
  bool ok = true;
  std::cout << "kernel,t0,median_error\n";
  std::vector<std::string> notes;
  for (const auto family : {KernelFamily::RBF, KernelFamily::Matern}) {
    diag::ErrorVsT0Config c;
    c.kernel.family = family;
    c.sigma2 = o.num("diag.sigma2", c.sigma2);
    c.dim = o.integer("diag.dim", c.dim);
    c.trials = o.integer("diag.trials", c.trials);
    c.seed = static_cast<std::uint64_t>(o.integer("diag.seed", 0));
    c.threads = o.integer("diag.threads", 1);
    const auto r = diag::error_vs_t0(c);
    const std::string name = family == KernelFamily::RBF ? "rbf" : "matern";
    for (const auto& row : r.rows) std::cout << name << ',' << row.t0 << ',' << format_number(row.median_error) << '\n';
    const bool shrinks = r.rows.back().median_error < r.rows.front().median_error;
    const double frac = r.monotone_fraction();
    ok = ok && shrinks && frac >= 0.9;
    notes.push_back(name + " monotone_fraction=" + format_number(frac));
  }
  std::cout << "error-vs-t0: " << verdict(ok);
  for (const auto& n : notes) std::cout << ' ' << n;
  std::cout << '\n';
  return ok ? kOk : kGateFailure;
}

int diag_speedup(const DiagOptions& o) {
  // objective.name picks the benchmark; defaults to ackley.
  ObjectiveName name = ObjectiveName::Ackley;
  for (const auto& s : o.config_overrides)
    if (s.rfind("objective.name=", 0) == 0) name = parse_objective(s.substr(15));
  const RunConfig config = speedup_config(name, o.config_overrides);
  const auto gate = speedup_gate(config);
  std::cout << "method,iterations_to_threshold,speedup\n";
  for (const auto& r : gate.rows)
    std::cout << r.method << ',' << (r.iterations ? format_number(*r.iterations) : "inf") << ','
              << (r.iterations ? format_number(r.speedup) : "inf_marker") << '\n';
  std::cout << "reference sqrt(N)=" << format_number(std::sqrt(static_cast<double>(config.method.n))) << '\n';
  std::cout << "speedup: " << verdict(gate.passed) << " objective=" << to_string(name)
            << " threshold=" << format_number(config.threshold) << " optex/vanilla=" << format_number(gate.optex_ratio)
            << " target/optex=" << format_number(gate.target_ratio) << '\n';
  return gate.passed ? kOk : kGateFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optex: first-order optimization with approximately parallelized iterations"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> run_sets;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  auto* run_cmd = app.add_subcommand("run", "run an experiment and write traces");
  run_cmd->add_option("--config", config_path, "JSON config file");
  run_cmd->add_option("--set", run_sets, "override key=value (repeatable)");
  run_cmd->add_option("--seed", seed, "base seed (overrides run.seed)");
  run_cmd->add_option("--out", out_dir, "output directory");

  std::vector<std::string> dirs;
  double threshold = 0.0;
  std::string csv_path;
  auto* compare_cmd = app.add_subcommand("compare", "tabulate iterations to a gap threshold");
  compare_cmd->add_option("dirs", dirs, "run directories")->required();
  compare_cmd->add_option("--threshold", threshold, "optimality-gap threshold")->required();
  compare_cmd->add_option("--csv", csv_path, "also write the table as CSV to this file");

  std::string target;
  std::vector<std::string> diag_sets;
  auto* diag_cmd = app.add_subcommand("diag", "numeric checks");
  diag_cmd->add_option("target", target, "prop1 | variance | infogain | error-vs-t0 | speedup")
      ->required()
      ->check(CLI::IsMember({"prop1", "variance", "infogain", "error-vs-t0", "speedup"}));
  diag_cmd->add_option("--set", diag_sets, "override key=value (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd) {
      auto sets = run_sets;
      if (seed) sets.push_back("run.seed=" + std::to_string(*seed));
      if (!out_dir.empty()) sets.push_back("run.output_dir=" + out_dir);
      const RunConfig config =
          parse_config(config_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_path), sets);
      const auto dir = default_output_dir(config);
      const auto result = run_experiment(config, dir);
      std::cout << "wrote " << dir.string() << " (config " << config.hash() << ")\n";
      for (const auto& [method, entry] : result.summary["methods"].items())
        std::cout << std::left << std::setw(12) << method << " median iterations to " << config.threshold << ": "
                  << entry["iterations_to_threshold"]["median"] << '\n';
      if (result.failed()) {
        for (const auto& r : result.runs)
          if (!r.trace.failure.empty())
            std::cerr << "error: " << to_string(r.method) << " seed " << r.seed << ": " << r.trace.failure << '\n';
        return kRuntimeError;
      }
      return kOk;
    }
    if (*compare_cmd) {
      std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
      const auto result = compare(paths, threshold);
      std::cout << result.table << '\n' << result.csv;
      if (!csv_path.empty()) {
        std::ofstream f(csv_path, std::ios::binary);
        if (!f) throw Error("cannot write " + csv_path);
        f << result.csv;
      }
      if (result.none_reached)
        std::cerr << "warning: no method reached threshold " << format_number(threshold) << '\n';
      return kOk;
    }
    const DiagOptions o = split_diag_overrides(diag_sets);
    if (target == "prop1") return diag_prop1(o);
    if (target == "variance") return diag_variance(o);
    if (target == "infogain") return diag_infogain(o);
    if (target == "error-vs-t0") return diag_error_vs_t0(o);
    return diag_speedup(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}
