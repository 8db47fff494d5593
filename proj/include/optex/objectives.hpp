#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "optex/common.hpp"

namespace optex {

enum class ObjectiveName { Ackley, RosenbrockPaper, RosenbrockStandard, Quadratic, LogisticBlobs };

struct ObjectiveSpec {
  ObjectiveName name = ObjectiveName::Ackley;
  Eigen::Index dim = 10;
  double noise_sigma = 0.0;  // std-dev of additive per-coordinate gradient noise
  double L = 1.0;            // Quadratic curvature
  std::uint64_t data_seed = 0;
  std::size_t batch_size = 64;  // LogisticBlobs minibatch rows, 0 = full data
  double init_scale = 2.0;      // half-width of the uniform box for the initial point

  void validate() const;
  bool operator==(const ObjectiveSpec&) const = default;
};

/// The shared randomness `x` of one sequential iteration.
struct Batch {
  std::uint64_t noise_key = 0;
  std::vector<std::size_t> indices;  // LogisticBlobs rows; empty otherwise

  bool operator==(const Batch&) const = default;
};

/// Two-class Gaussian blobs with labels in {0, 1}.
struct BlobData {
  Matrix features;  // rows = samples
  Eigen::VectorXd labels;

  static constexpr std::size_t kDefaultSamples = 2000;
  static BlobData generate(Eigen::Index dim, std::uint64_t seed, std::size_t samples = kDefaultSamples);
  static BlobData load_csv(const std::filesystem::path& path);
  void save_csv(const std::filesystem::path& path) const;
};

/// Deterministic mixing of two 64-bit words (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

/// Objective F with exact gradients and optional Gaussian gradient noise.
/// Evaluation is const and thread-safe; LogisticBlobs data is shared read-only.
class Objective {
 public:
  explicit Objective(ObjectiveSpec spec, std::shared_ptr<const BlobData> data = nullptr);

  const ObjectiveSpec& spec() const noexcept { return spec_; }
  Eigen::Index dim() const noexcept { return spec_.dim; }

  double eval_value(const ParamVector& theta, const Batch& batch) const;
  /// Analytic gradient plus noise drawn from `batch.noise_key`; the noise does
  /// not depend on theta, so one batch gives every worker the same realization.
  ParamVector eval_grad(const ParamVector& theta, const Batch& batch) const;
  /// Noise-free analytic gradient.
  ParamVector exact_grad(const ParamVector& theta, const Batch& batch) const;

  Batch make_batch(std::uint64_t run_seed, std::int64_t seq_iter) const;

  /// inf F when known analytically.
  std::optional<double> optimum_value() const;
  std::optional<ParamVector> minimizer() const;

  /// Seeded starting point: uniform in [-init_scale, init_scale]^d.
  ParamVector initial_point(std::uint64_t seed) const;

  const BlobData* data() const noexcept { return data_.get(); }

 private:
  void check(const ParamVector& theta, const char* what) const;

  ObjectiveSpec spec_;
  std::shared_ptr<const BlobData> data_;
};

std::string to_string(ObjectiveName name);

}  // namespace optex
