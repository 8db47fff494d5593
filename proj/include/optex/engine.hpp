#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "optex/grad_estimator.hpp"
#include "optex/objectives.hpp"
#include "optex/optimizers.hpp"

namespace optex {

enum class Method { OptEx, Vanilla, LineSearch, Target };
enum class Selection { MinValue, MinGradNorm, LastCandidate };

struct MethodSpec {
  Method method = Method::OptEx;
  int n = 5;
  Selection selection = Selection::MinValue;
  int warmup = 2;

  /// Vanilla runs with N = 1 and Target always continues from the last candidate.
  MethodSpec normalized() const;
  void validate() const;
  bool operator==(const MethodSpec&) const = default;
};

std::string to_string(Method m);
std::string to_string(Selection s);

// Proxy gradient sources for the multi-step proxy chain.
struct EstimatedGradient {
  const GradientEstimator* estimator;
};
struct FrozenGradient {
  ParamVector g0;
};
struct TrueGradient {
  const Objective* objective;
  Batch batch;
};
using ProxyMode = std::variant<EstimatedGradient, FrozenGradient, TrueGradient>;

struct ProxyPoint {
  ParamVector theta;
  OptimizerState state;
};

/// Entry 0 is (theta0, state0); entry s applies one optimizer step to entry
/// s-1 using the gradient supplied by `mode`.
std::vector<ProxyPoint> proxy_chain(const OptimizerSpec& opt, const OptimizerState& state0,
                                    const ParamVector& theta0, int n, const ProxyMode& mode);

struct Candidate {
  ParamVector theta_pre;
  ParamVector grad_pre;
  ParamVector theta_post;
  OptimizerState state_post;
  double f_post = 0.0;
  double gradnorm_post = std::numeric_limits<double>::quiet_NaN();  // only with MinGradNorm
};

struct ParallelOptions {
  int threads = 1;
  bool post_gradnorm = false;
};

/// Runs the N true-gradient updates of one sequential iteration, one work unit
/// per start, and gathers the candidates in worker-index order.
std::vector<Candidate> parallel_step(const Objective& objective, const Batch& batch, const OptimizerSpec& opt,
                                     const std::vector<ProxyPoint>& starts, const std::vector<double>& lr_scales,
                                     const ParallelOptions& options);

namespace serial {
std::vector<Candidate> parallel_step(const Objective& objective, const Batch& batch, const OptimizerSpec& opt,
                                     const std::vector<ProxyPoint>& starts, const std::vector<double>& lr_scales,
                                     bool post_gradnorm);
}

/// Index chosen by `rule`; ties go to the lowest index.
std::size_t select(const std::vector<Candidate>& candidates, Selection rule);

struct TraceRow {
  std::int64_t seq_iter = 0;
  double current_value = 0.0;
  double best_value = 0.0;
  double grad_norm = 0.0;  // norm of the gradient at the iteration's starting point
  std::int64_t selected_index = 0;
  std::int64_t cum_grad_evals = 0;
  std::int64_t cum_value_evals = 0;
  double wallclock_ms = 0.0;

  bool operator==(const TraceRow&) const = default;
};

struct RunTrace {
  Method method = Method::OptEx;
  std::uint64_t seed = 0;
  std::int64_t warmup_iters = 0;
  std::vector<TraceRow> rows;
  ParamVector final_theta;
  std::string failure;  // empty on success
};

struct RunSetup {
  ObjectiveSpec objective;
  OptimizerSpec optimizer;
  EstimatorConfig estimator;
  MethodSpec method;
  std::optional<std::size_t> history_capacity;  // unset: max(t0, n)
  std::int64_t iterations = 100;
  std::uint64_t seed = 0;
  int threads = 1;
  bool record_wallclock = false;
};

/// Observer invoked after every sequential iteration (tests, progress output).
struct IterationView {
  std::int64_t seq_iter;
  const std::vector<Candidate>& candidates;
  std::size_t selected;
  const GradientHistory& history;
};
using IterationHook = std::function<void(const IterationView&)>;

/// Full optimization run. Errors inside the loop are caught: the trace is kept
/// up to the failing iteration and `failure` carries the message.
RunTrace run(const RunSetup& setup, const Objective& objective, const IterationHook& hook = {});
RunTrace run(const RunSetup& setup);

}  // namespace optex
