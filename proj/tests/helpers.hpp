#pragma once

#include <memory>
#include <random>
#include <vector>

#include "optex/grad_estimator.hpp"

namespace optex::testing {

inline ParamVector vec(std::initializer_list<double> xs) {
  ParamVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

inline ParamVector random_vec(std::mt19937_64& rng, Eigen::Index d, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  ParamVector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = u(rng);
  return v;
}

inline RecordPtr record(ParamVector theta, ParamVector grad, std::int64_t seq = 0, int worker = 0) {
  return std::make_shared<const GradientRecord>(GradientRecord{std::move(theta), std::move(grad), seq, worker});
}

inline std::vector<RecordPtr> random_window(std::mt19937_64& rng, int n, Eigen::Index d) {
  std::vector<RecordPtr> w;
  for (int i = 0; i < n; ++i) w.push_back(record(random_vec(rng, d, 0.0, 2.0), random_vec(rng, d), i));
  return w;
}

}  // namespace optex::testing
