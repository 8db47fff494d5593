#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "optex/config.hpp"
#include "optex/diagnostics.hpp"

namespace optex {

struct RunOutcome {
  Method method = Method::OptEx;
  std::uint64_t seed = 0;
  RunTrace trace;
  std::optional<std::int64_t> iterations_to_threshold;
};

struct ExperimentResult {
  std::filesystem::path dir;
  std::vector<RunOutcome> runs;
  nlohmann::json summary;
  bool failed() const;
};

/// Loads or generates the dataset the objective needs (LogisticBlobs only).
Objective make_objective(const RunConfig& config);

/// Gap to the analytic minimum, or the raw value when none is known.
double optimality_gap(const Objective& objective, double value);

/// `config.output_dir`, else $OPTEX_OUTPUT_ROOT (or ./runs) joined with the config hash.
std::filesystem::path default_output_dir(const RunConfig& config);

/// Runs every configured method for seeds seed .. seed+repeats-1 and writes
/// config.json, trace_<method>_seed<S>.csv, summary.json and plot_data.csv.
/// Failed runs keep their partial traces; check `failed()`.
ExperimentResult run_experiment(const RunConfig& config, const std::filesystem::path& dir);

/// Writes the trace CSV (comment line + fixed header).
void write_trace_csv(std::ostream& out, const RunTrace& trace, const std::string& config_hash,
                     const Objective& objective);

/// Locale-independent shortest round-trip formatting; "inf", "-inf", "nan".
std::string format_number(double v);

/// Speedup benchmark settings: d = 1000, Adam(0.1, 0.9, 0.999), Matern T0 = 150,
/// N = 5, T = 300, five seeds, methods vanilla, optex and target, with a
/// per-objective gap threshold.
RunConfig speedup_config(ObjectiveName name, const std::vector<std::string>& overrides = {});

struct SpeedupGate {
  std::vector<diag::SpeedupRow> rows;
  double optex_ratio = 0.0;   // optex / vanilla median iterations
  double target_ratio = 0.0;  // target / optex median iterations
  bool passed = false;
};

/// Runs `config` in memory (nothing written) and checks optex <= 0.7 vanilla
/// and target <= 1.1 optex on median iterations to `config.threshold`.
SpeedupGate speedup_gate(const RunConfig& config);

struct LoadedTrace {
  std::string method;
  std::uint64_t seed = 0;
  std::string objective;
  std::int64_t dim = 0;
  std::optional<double> f_star;
  std::vector<TraceRow> rows;
};

LoadedTrace load_trace_csv(const std::filesystem::path& path);

struct CompareResult {
  std::vector<diag::SpeedupRow> rows;
  std::string table;  // aligned text
  std::string csv;
  bool none_reached = false;
};

/// Gathers trace CSVs from the directories and tabulates iterations to the
/// threshold and speedup against vanilla.
CompareResult compare(const std::vector<std::filesystem::path>& dirs, double threshold);

}  // namespace optex
