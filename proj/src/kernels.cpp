#include "optex/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace optex {

namespace {

std::vector<const ParamVector*> as_pointers(std::span<const ParamVector> points) {
  std::vector<const ParamVector*> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(&p);
  return out;
}

void check_points(std::span<const ParamVector* const> points, const char* what) {
  if (points.empty()) throw DomainError(std::string(what) + ": empty point list");
  const auto d = points.front()->size();
  for (const auto* p : points) {
    require_same_dim(p->size(), d, what);
    require_finite(*p, what);
  }
}

inline double distance(const ParamVector& a, const ParamVector& b) { return (a - b).norm(); }

}  // namespace

void KernelSpec::validate() const {
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) throw DomainError("kernel: lengthscale must be > 0");
  if (!(output_scale > 0.0) || !std::isfinite(output_scale)) throw DomainError("kernel: output_scale must be > 0");
}

double kernel_from_distance(const KernelSpec& spec, double r) noexcept {
  const double s = r / spec.lengthscale;
  if (spec.family == KernelFamily::RBF) return spec.output_scale * std::exp(-0.5 * s * s);
  switch (spec.nu) {
    case MaternNu::Half:
      return spec.output_scale * std::exp(-s);
    case MaternNu::ThreeHalves: {
      const double z = std::sqrt(3.0) * s;
      return spec.output_scale * (1.0 + z) * std::exp(-z);
    }
    case MaternNu::FiveHalves:
    default: {
      const double z = std::sqrt(5.0) * s;
      return spec.output_scale * (1.0 + z + z * z / 3.0) * std::exp(-z);
    }
  }
}

double kernel_eval(const KernelSpec& spec, const ParamVector& a, const ParamVector& b) {
  require_same_dim(a.size(), b.size(), "kernel_eval");
  require_finite(a, "kernel_eval");
  require_finite(b, "kernel_eval");
  return kernel_from_distance(spec, distance(a, b));
}

Matrix gram(const KernelSpec& spec, std::span<const ParamVector> points) {
  const auto ptrs = as_pointers(points);
  return gram(spec, std::span<const ParamVector* const>(ptrs));
}

Matrix gram(const KernelSpec& spec, std::span<const ParamVector* const> points) {
  check_points(points, "gram");
  const auto n = static_cast<Eigen::Index>(points.size());
  Matrix k(n, n);
#pragma omp parallel for schedule(dynamic, 4)
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = spec.output_scale;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      k(i, j) = kernel_from_distance(spec, distance(*points[i], *points[j]));
    }
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) k(j, i) = k(i, j);
  return k;
}

Eigen::VectorXd cross(const KernelSpec& spec, const ParamVector& query, std::span<const ParamVector> points) {
  const auto ptrs = as_pointers(points);
  return cross(spec, query, std::span<const ParamVector* const>(ptrs));
}

Eigen::VectorXd cross(const KernelSpec& spec, const ParamVector& query,
                      std::span<const ParamVector* const> points) {
  check_points(points, "cross");
  require_same_dim(query.size(), points.front()->size(), "cross");
  require_finite(query, "cross");
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::VectorXd out(n);
#pragma omp parallel for if (n * query.size() > 65536)
  for (Eigen::Index i = 0; i < n; ++i) out(i) = kernel_from_distance(spec, distance(query, *points[i]));
  return out;
}

double median_pairwise_distance(std::span<const ParamVector* const> points) {
  if (points.size() < 2) return 0.0;
  std::vector<double> dists;
  dists.reserve(points.size() * (points.size() - 1) / 2);
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) dists.push_back(distance(*points[i], *points[j]));
  const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  if (dists.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(dists.begin(), mid);
  return 0.5 * (lower + upper);
}

namespace serial {

Matrix gram(const KernelSpec& spec, std::span<const ParamVector* const> points) {
  check_points(points, "gram");
  const auto n = static_cast<Eigen::Index>(points.size());
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = spec.output_scale;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      k(i, j) = kernel_from_distance(spec, distance(*points[i], *points[j]));
      k(j, i) = k(i, j);
    }
  }
  return k;
}

Eigen::VectorXd cross(const KernelSpec& spec, const ParamVector& query,
                      std::span<const ParamVector* const> points) {
  check_points(points, "cross");
  require_same_dim(query.size(), points.front()->size(), "cross");
  require_finite(query, "cross");
  Eigen::VectorXd out(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = kernel_from_distance(spec, distance(query, *points[i]));
  return out;
}

}  // namespace serial

}  // namespace optex
