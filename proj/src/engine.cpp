#include "optex/engine.hpp"

#include <chrono>
#include <cmath>

namespace optex {

std::string to_string(Method m) {
  switch (m) {
    case Method::OptEx: return "optex";
    case Method::Vanilla: return "vanilla";
    case Method::LineSearch: return "linesearch";
    case Method::Target: return "target";
  }
  return "unknown";
}

std::string to_string(Selection s) {
  switch (s) {
    case Selection::MinValue: return "min_value";
    case Selection::MinGradNorm: return "min_grad_norm";
    case Selection::LastCandidate: return "last_candidate";
  }
  return "unknown";
}

MethodSpec MethodSpec::normalized() const {
  MethodSpec out = *this;
  if (out.method == Method::Vanilla) out.n = 1;
  if (out.method == Method::Target) out.selection = Selection::LastCandidate;
  return out;
}

void MethodSpec::validate() const {
  if (n < 1) throw DomainError("method: n must be >= 1");
  if (warmup < 1) throw DomainError("method: warmup must be >= 1");
  if (method == Method::Vanilla && n != 1) throw DomainError("method: vanilla requires n = 1");
}

std::vector<ProxyPoint> proxy_chain(const OptimizerSpec& opt, const OptimizerState& state0,
                                    const ParamVector& theta0, int n, const ProxyMode& mode) {
  if (n < 1) throw DomainError("proxy_chain: n must be >= 1");
  std::vector<ProxyPoint> chain;
  chain.reserve(static_cast<std::size_t>(n));
  chain.push_back({theta0, state0});
  for (int s = 1; s < n; ++s) {
    const auto& prev = chain.back();
    const ParamVector grad = std::visit(
        [&](const auto& m) -> ParamVector {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, EstimatedGradient>) {
            return m.estimator->posterior_mean(prev.theta);
          } else if constexpr (std::is_same_v<M, FrozenGradient>) {
            return m.g0;
          } else {
            return m.objective->eval_grad(prev.theta, m.batch);
          }
        },
        mode);
    StepResult next = step(opt, prev.state, prev.theta, grad);
    // SGD under a frozen gradient: closed form keeps theta0 - s * lr * g0 exact.
    if (opt.family == OptimizerFamily::SGD && std::holds_alternative<FrozenGradient>(mode))
      next.theta = theta0 - (static_cast<double>(s) * opt.lr) * grad;
    if (!next.theta.allFinite())
      throw DomainError("proxy_chain: non-finite iterate at proxy step " + std::to_string(s));
    chain.push_back({std::move(next.theta), std::move(next.state)});
  }
  return chain;
}

namespace {

Candidate evaluate_worker(const Objective& objective, const Batch& batch, const OptimizerSpec& opt,
                          const ProxyPoint& start, double lr_scale, bool post_gradnorm) {
  Candidate c;
  c.theta_pre = start.theta;
  c.grad_pre = objective.eval_grad(start.theta, batch);
  StepResult next = step(opt, start.state, start.theta, c.grad_pre, lr_scale);
  c.theta_post = std::move(next.theta);
  c.state_post = std::move(next.state);
  c.f_post = objective.eval_value(c.theta_post, batch);
  if (post_gradnorm) c.gradnorm_post = objective.eval_grad(c.theta_post, batch).norm();
  return c;
}

void check_starts(const std::vector<ProxyPoint>& starts, const std::vector<double>& lr_scales) {
  if (starts.empty()) throw DomainError("parallel_step: no starts");
  if (lr_scales.size() != starts.size()) throw DimensionError("parallel_step: lr_scales size differs from starts");
  for (const auto& s : starts) require_same_dim(s.theta.size(), starts.front().theta.size(), "parallel_step");
}

}  // namespace

std::vector<Candidate> parallel_step(const Objective& objective, const Batch& batch, const OptimizerSpec& opt,
                                     const std::vector<ProxyPoint>& starts, const std::vector<double>& lr_scales,
                                     const ParallelOptions& options) {
  check_starts(starts, lr_scales);
  const auto n = static_cast<int>(starts.size());
  std::vector<Candidate> out(starts.size());
  std::vector<std::string> errors(starts.size());
#pragma omp parallel for schedule(static, 1) num_threads(options.threads > 0 ? options.threads : 1)
  for (int i = 0; i < n; ++i) {
    try {
      out[i] = evaluate_worker(objective, batch, opt, starts[i], lr_scales[i], options.post_gradnorm);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (int i = 0; i < n; ++i)
    if (!errors[i].empty()) throw Error("parallel_step: worker " + std::to_string(i) + " failed: " + errors[i]);
  return out;
}

namespace serial {

std::vector<Candidate> parallel_step(const Objective& objective, const Batch& batch, const OptimizerSpec& opt,
                                     const std::vector<ProxyPoint>& starts, const std::vector<double>& lr_scales,
                                     bool post_gradnorm) {
  check_starts(starts, lr_scales);
  std::vector<Candidate> out;
  out.reserve(starts.size());
  for (std::size_t i = 0; i < starts.size(); ++i) {
    try {
      out.push_back(evaluate_worker(objective, batch, opt, starts[i], lr_scales[i], post_gradnorm));
    } catch (const std::exception& e) {
      throw Error("parallel_step: worker " + std::to_string(i) + " failed: " + e.what());
    }
  }
  return out;
}

}  // namespace serial

std::size_t select(const std::vector<Candidate>& candidates, Selection rule) {
  if (candidates.empty()) throw DomainError("select: no candidates");
  if (rule == Selection::LastCandidate) return candidates.size() - 1;
  auto key = [rule](const Candidate& c) { return rule == Selection::MinValue ? c.f_post : c.gradnorm_post; };
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i)
    if (key(candidates[i]) < key(candidates[best])) best = i;
  return best;
}

RunTrace run(const RunSetup& setup) {
  Objective objective(setup.objective);
  return run(setup, objective);
}

RunTrace run(const RunSetup& setup, const Objective& objective, const IterationHook& hook) {
  const MethodSpec method = setup.method.normalized();
  method.validate();
  setup.optimizer.validate();
  setup.estimator.validate();
  if (setup.iterations < 1) throw DomainError("run: T must be >= 1");

  RunTrace trace;
  trace.method = method.method;
  trace.seed = setup.seed;
  trace.warmup_iters = std::min<std::int64_t>(method.warmup, setup.iterations);
  trace.rows.reserve(static_cast<std::size_t>(setup.iterations));

  const std::size_t capacity =
      setup.history_capacity.value_or(std::max(setup.estimator.t0, static_cast<std::size_t>(method.n)));
  GradientHistory history(capacity);
  ParamVector theta = objective.initial_point(setup.seed);
  OptimizerState state = init_state(setup.optimizer, objective.dim());
  const bool post_gradnorm = method.selection == Selection::MinGradNorm;
  const ParallelOptions options{setup.threads, post_gradnorm};

  double best = std::numeric_limits<double>::infinity();
  std::int64_t grad_evals = 0;
  std::int64_t value_evals = 0;
  const auto start_time = std::chrono::steady_clock::now();

  for (std::int64_t t = 1; t <= setup.iterations; ++t) {
    try {
      const Batch batch = objective.make_batch(setup.seed, t);
      const int n = t <= trace.warmup_iters ? 1 : method.n;

      std::vector<ProxyPoint> starts;
      std::vector<double> lr_scales(static_cast<std::size_t>(n), 1.0);
      if (n == 1) {
        starts.push_back({theta, state});
      } else {
        switch (method.method) {
          case Method::OptEx: {
            const auto est =
                GradientEstimator::fit(select_window(history, theta, setup.estimator), setup.estimator);
            starts = proxy_chain(setup.optimizer, state, theta, n, EstimatedGradient{&est});
            break;
          }
          case Method::LineSearch:
            // g0 is the gradient worker 0 evaluates at the same point and batch.
            starts = proxy_chain(setup.optimizer, state, theta, n, FrozenGradient{objective.eval_grad(theta, batch)});
            for (int i = 0; i < n; ++i) lr_scales[static_cast<std::size_t>(i)] = static_cast<double>(i + 1);
            break;
          case Method::Target:
            // Proxy gradients coincide with the workers' own evaluations.
            starts = proxy_chain(setup.optimizer, state, theta, n, TrueGradient{&objective, batch});
            break;
          case Method::Vanilla:
            break;
        }
      }

      const auto candidates = parallel_step(objective, batch, setup.optimizer, starts, lr_scales, options);
      for (std::size_t i = 0; i < candidates.size(); ++i)
        history.push({candidates[i].theta_pre, candidates[i].grad_pre, t, static_cast<int>(i)});
      const std::size_t selected = n == 1 ? 0 : select(candidates, method.selection);

      theta = candidates[selected].theta_post;
      state = candidates[selected].state_post;
      grad_evals += n * (post_gradnorm ? 2 : 1);
      value_evals += n;
      best = std::min(best, candidates[selected].f_post);

      TraceRow row;
      row.seq_iter = t;
      row.current_value = candidates[selected].f_post;
      row.best_value = best;
      row.grad_norm = candidates.front().grad_pre.norm();
      row.selected_index = static_cast<std::int64_t>(selected);
      row.cum_grad_evals = grad_evals;
      row.cum_value_evals = value_evals;
      if (setup.record_wallclock)
        row.wallclock_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_time).count();
      trace.rows.push_back(row);
      if (hook) hook(IterationView{t, candidates, selected, history});
    } catch (const std::exception& e) {
      trace.failure = "iteration " + std::to_string(t) + ": " + e.what();
      break;
    }
  }
  trace.final_theta = theta;
  return trace;
}

}  // namespace optex
