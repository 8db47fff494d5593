#pragma once

#include <span>
#include <vector>

#include "optex/common.hpp"

namespace optex {

enum class KernelFamily { RBF, Matern };
enum class MaternNu { Half, ThreeHalves, FiveHalves };
enum class LengthscaleMode { Fixed, Median };

/// Stationary scalar kernel k(a, b) = output_scale * shape(||a - b|| / lengthscale).
struct KernelSpec {
  KernelFamily family = KernelFamily::Matern;
  double lengthscale = 1.0;
  double output_scale = 1.0;
  MaternNu nu = MaternNu::FiveHalves;
  LengthscaleMode lengthscale_mode = LengthscaleMode::Fixed;

  void validate() const;
  bool operator==(const KernelSpec&) const = default;
};

/// Kernel value as a function of the Euclidean distance r >= 0.
double kernel_from_distance(const KernelSpec& spec, double r) noexcept;

double kernel_eval(const KernelSpec& spec, const ParamVector& a, const ParamVector& b);

/// Gram matrix over `points`. Rows are filled in parallel; every entry is
/// computed independently so the result is bitwise equal to serial::gram.
Matrix gram(const KernelSpec& spec, std::span<const ParamVector> points);
Matrix gram(const KernelSpec& spec, std::span<const ParamVector* const> points);

Eigen::VectorXd cross(const KernelSpec& spec, const ParamVector& query,
                      std::span<const ParamVector> points);
Eigen::VectorXd cross(const KernelSpec& spec, const ParamVector& query,
                      std::span<const ParamVector* const> points);

/// Median of the pairwise distances, 0 for fewer than two points.
double median_pairwise_distance(std::span<const ParamVector* const> points);

namespace serial {
// Reference implementations without OpenMP, kept for testing and benchmarks.
Matrix gram(const KernelSpec& spec, std::span<const ParamVector* const> points);
Eigen::VectorXd cross(const KernelSpec& spec, const ParamVector& query,
                      std::span<const ParamVector* const> points);
}  // namespace serial

}  // namespace optex
