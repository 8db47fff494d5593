#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include "optex/common.hpp"
#include "optex/kernels.hpp"

namespace optex {

/// One observed gradient: the input it was evaluated at and the noisy value.
struct GradientRecord {
  ParamVector theta;
  ParamVector grad;
  std::int64_t seq_iter = 0;
  int worker = 0;
};

using RecordPtr = std::shared_ptr<const GradientRecord>;

/// Insertion-ordered store of gradient records with an optional ring-buffer bound.
class GradientHistory {
 public:
  GradientHistory() = default;
  explicit GradientHistory(std::optional<std::size_t> capacity);

  void push(GradientRecord record);

  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  std::optional<std::size_t> capacity() const noexcept { return capacity_; }
  const std::deque<RecordPtr>& records() const noexcept { return records_; }
  const GradientRecord& operator[](std::size_t i) const { return *records_.at(i); }

 private:
  std::deque<RecordPtr> records_;
  std::optional<std::size_t> capacity_;
};

enum class WindowMode { Recent, Nearest };

struct EstimatorConfig {
  KernelSpec kernel;
  double noise_sigma2 = 0.0;
  double jitter = 1e-6;  // diagonal shift, escalated x10 up to 1e-2 * output_scale
  std::size_t t0 = 150;
  WindowMode window_mode = WindowMode::Recent;

  void validate() const;
  bool operator==(const EstimatorConfig&) const = default;
};

/// At most `t0` records taken from `history`, returned in insertion order.
/// Recent keeps the newest ones; Nearest keeps those closest to `theta`,
/// breaking distance ties in favour of the newer record.
std::vector<RecordPtr> select_window(const GradientHistory& history, const ParamVector& theta,
                                     const EstimatorConfig& config);

/// Posterior over the gradient field under the separable kernel k(.,.) I.
///
/// The d output GPs share one n x n system (K_n + (sigma^2 + jitter) I), so a
/// single Cholesky factor serves every coordinate. After `fit` the estimator is
/// immutable; queries cost O(n d) for the cross-covariances plus O(n^2) for the
/// triangular solves and never refactorize.
class GradientEstimator {
 public:
  static GradientEstimator fit(std::vector<RecordPtr> window, const EstimatorConfig& config);

  ParamVector posterior_mean(const ParamVector& theta) const;
  /// Scalar multiplier of the identity in the posterior covariance, clamped at 0.
  double posterior_variance(const ParamVector& theta) const;
  /// Same quantity before clamping; can be slightly negative from round-off.
  double posterior_variance_raw(const ParamVector& theta) const;

  std::size_t size() const noexcept { return window_.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(window_.front()->theta.size()); }
  const Matrix& factor() const noexcept { return factor_; }
  const std::vector<RecordPtr>& window() const noexcept { return window_; }
  /// Kernel actually used (lengthscale resolved when the median heuristic is on).
  const KernelSpec& kernel() const noexcept { return kernel_; }
  /// Diagonal shift that made the factorization succeed (after escalation).
  double jitter_used() const noexcept { return jitter_used_; }
  const EstimatorConfig& config() const noexcept { return config_; }

  /// Number of n x n factorizations performed by `fit` since program start.
  static std::size_t factorization_count() noexcept;

 private:
  GradientEstimator() = default;

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::VectorXd cross_cov(const ParamVector& theta) const;

  std::vector<RecordPtr> window_;
  std::vector<const ParamVector*> thetas_;
  EstimatorConfig config_;
  KernelSpec kernel_;
  Matrix factor_;
  double jitter_used_ = 0.0;
};

}  // namespace optex
