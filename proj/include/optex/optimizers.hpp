#pragma once

#include <cstdint>

#include "optex/common.hpp"

namespace optex {

enum class OptimizerFamily { SGD, SGDMomentum, Adam };

struct OptimizerSpec {
  OptimizerFamily family = OptimizerFamily::Adam;
  double lr = 0.1;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
  bool operator==(const OptimizerSpec&) const = default;
};

/// Per-run optimizer state. A plain value: copying it branches the optimizer.
struct OptimizerState {
  std::int64_t step_count = 0;
  ParamVector m;  // momentum buffer / Adam first moment
  ParamVector v;  // Adam second moment

  bool operator==(const OptimizerState& o) const {
    return step_count == o.step_count && m == o.m && v == o.v;
  }
};

struct StepResult {
  ParamVector theta;
  OptimizerState state;
};

OptimizerState init_state(const OptimizerSpec& spec, Eigen::Index d);

/// One FO-OPT update. Pure: `state` is not modified and a fresh state is
/// returned. `lr_scale` multiplies the learning rate for this call only.
///
/// Adam keeps both bias corrections and guards the denominator with
/// eps * sqrt(1 - beta2^t), so the first step moves each coordinate by
/// lr * g / (|g| + eps * sqrt(1 - beta2)).
StepResult step(const OptimizerSpec& spec, const OptimizerState& state, const ParamVector& theta,
                const ParamVector& grad, double lr_scale = 1.0);

}  // namespace optex
