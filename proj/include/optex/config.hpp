#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "optex/engine.hpp"

namespace optex {

/// Fully resolved experiment configuration.
///
/// Files are JSON objects nested by the dotted key namespace
/// (`{"objective": {"name": "ackley"}}` sets `objective.name`); command-line
/// overrides use `key=value` with the same dotted paths and win over the file.
struct RunConfig {
  ObjectiveSpec objective;
  std::string data_path;  // LogisticBlobs CSV; empty = generate from data_seed
  OptimizerSpec optimizer;
  EstimatorConfig estimator;
  std::optional<std::size_t> history_capacity;
  std::vector<Method> methods{Method::OptEx};
  MethodSpec method;  // n, selection and warmup shared by all methods
  std::int64_t iterations = 100;
  std::uint64_t seed = 0;
  int threads = 1;
  int repeats = 1;
  std::string output_dir;
  double threshold = 1e-2;
  bool record_wallclock = false;

  /// Nested JSON of every key, suitable for `parse_config_json`.
  nlohmann::json to_json() const;
  /// FNV-1a of the canonical JSON dump without run.threads and
  /// run.output_dir, as 16 hex digits.
  std::string hash() const;
  RunSetup setup_for(Method m, std::uint64_t run_seed) const;
};

RunConfig parse_config_json(const nlohmann::json& doc, const std::vector<std::string>& overrides = {});
RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                       const std::vector<std::string>& overrides = {});

/// All recognised dotted keys, in canonical order.
std::vector<std::string> config_keys();

Method parse_method(const std::string& s);
Selection parse_selection(const std::string& s);
ObjectiveName parse_objective(const std::string& s);

}  // namespace optex
