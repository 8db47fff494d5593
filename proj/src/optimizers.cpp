#include "optex/optimizers.hpp"

#include <cmath>

namespace optex {

void OptimizerSpec::validate() const {
  if (!(lr > 0.0)) throw DomainError("optimizer: lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("optimizer: momentum must be in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw DomainError("optimizer: beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw DomainError("optimizer: beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw DomainError("optimizer: eps must be > 0");
}

OptimizerState init_state(const OptimizerSpec& spec, Eigen::Index d) {
  if (d < 1) throw DomainError("init_state: dimension must be >= 1");
  OptimizerState s;
  s.m = ParamVector::Zero(d);
  s.v = spec.family == OptimizerFamily::Adam ? ParamVector::Zero(d) : ParamVector::Zero(0);
  return s;
}

StepResult step(const OptimizerSpec& spec, const OptimizerState& state, const ParamVector& theta,
                const ParamVector& grad, double lr_scale) {
  require_same_dim(theta.size(), grad.size(), "step");
  require_same_dim(state.m.size(), theta.size(), "step state");
  require_finite(theta, "step theta");
  if (!grad.allFinite()) throw DomainError("step: non-finite gradient");

  const double lr = spec.lr * lr_scale;
  StepResult out{theta, state};
  out.state.step_count = state.step_count + 1;
  switch (spec.family) {
    case OptimizerFamily::SGD:
      out.theta.noalias() -= lr * grad;
      break;
    case OptimizerFamily::SGDMomentum:
      out.state.m = spec.momentum * state.m + grad;
      out.theta.noalias() -= lr * out.state.m;
      break;
    case OptimizerFamily::Adam: {
      const auto t = static_cast<double>(out.state.step_count);
      const double bc1 = 1.0 - std::pow(spec.beta1, t);
      const double bc2 = 1.0 - std::pow(spec.beta2, t);
      out.state.m = spec.beta1 * state.m + (1.0 - spec.beta1) * grad;
      out.state.v = spec.beta2 * state.v + (1.0 - spec.beta2) * grad.cwiseProduct(grad);
      const double guard = spec.eps * std::sqrt(bc2);
      out.theta.array() -=
          lr * (out.state.m.array() / bc1) / ((out.state.v.array() / bc2).sqrt() + guard);
      break;
    }
  }
  return out;
}

}  // namespace optex
