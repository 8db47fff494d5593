#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <random>

#include "helpers.hpp"
#include "optex/engine.hpp"

using namespace optex;
using optex::testing::random_vec;
using optex::testing::record;
using optex::testing::vec;

namespace {

OptimizerSpec sgd(double lr) {
  OptimizerSpec s;
  s.family = OptimizerFamily::SGD;
  s.lr = lr;
  return s;
}

Objective quadratic(Eigen::Index d, double L = 1.0, double sigma = 0.0) {
  ObjectiveSpec s;
  s.name = ObjectiveName::Quadratic;
  s.dim = d;
  s.L = L;
  s.noise_sigma = sigma;
  return Objective(s);
}

Candidate with_value(double f, double gn = 0.0) {
  Candidate c;
  c.f_post = f;
  c.gradnorm_post = gn;
  return c;
}

RunSetup setup_for(ObjectiveName name, Eigen::Index d, Method m, int n, std::int64_t T, std::uint64_t seed) {
  RunSetup s;
  s.objective.name = name;
  s.objective.dim = d;
  s.method.method = m;
  s.method.n = n;
  s.iterations = T;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("method spec normalization and validation") {
  MethodSpec v{Method::Vanilla, 5};
  CHECK(v.normalized().n == 1);
  CHECK_THROWS_AS(v.validate(), DomainError);
  MethodSpec t{Method::Target, 3, Selection::MinValue};
  CHECK(t.normalized().selection == Selection::LastCandidate);
  MethodSpec bad{Method::OptEx, 0};
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("proxy_chain: N = 1 is the start only") {
  const auto opt = sgd(0.5);
  const auto s0 = init_state(opt, 2);
  for (const ProxyMode& mode : {ProxyMode{FrozenGradient{vec({1, 0})}}, ProxyMode{FrozenGradient{vec({0, 3})}}}) {
    const auto chain = proxy_chain(opt, s0, vec({0.3, 0.4}), 1, mode);
    REQUIRE(chain.size() == 1);
    CHECK(chain[0].theta == vec({0.3, 0.4}));
    CHECK(chain[0].state == s0);
  }
}

TEST_CASE("proxy_chain: frozen gradient with SGD") {
  const auto opt = sgd(0.5);
  const auto chain = proxy_chain(opt, init_state(opt, 2), vec({0, 0}), 3, FrozenGradient{vec({1, 0})});
  REQUIRE(chain.size() == 3);
  CHECK(chain[0].theta == vec({0, 0}));
  CHECK(chain[1].theta == vec({-0.5, 0}));
  CHECK(chain[2].theta == vec({-1, 0}));
  CHECK(chain[2].state.step_count == 2);
}

TEST_CASE("proxy_chain: estimated gradient with one record") {
  EstimatorConfig c;
  c.kernel = KernelSpec{KernelFamily::RBF, 1.0, 1.0};
  c.noise_sigma2 = 1.0;
  c.jitter = 1e-300;
  const auto theta0 = vec({0.2, -0.1});
  const auto est = GradientEstimator::fit({record(theta0, vec({2, 0}))}, c);
  const auto opt = sgd(1.0);
  const auto chain = proxy_chain(opt, init_state(opt, 2), theta0, 2, EstimatedGradient{&est});
  const ParamVector moved = chain[1].theta - theta0;
  CHECK(moved(0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(moved(1) == 0.0);
}

TEST_CASE("proxy_chain: true gradient follows the objective") {
  const auto obj = quadratic(2);
  const auto opt = sgd(0.5);
  const auto chain = proxy_chain(opt, init_state(opt, 2), vec({4, 0}), 3, TrueGradient{&obj, Batch{}});
  CHECK(chain[1].theta == vec({2, 0}));
  CHECK(chain[2].theta == vec({1, 0}));
}

TEST_CASE("proxy_chain: non-finite iterate names the step") {
  const auto opt = sgd(1e308);
  try {
    proxy_chain(opt, init_state(opt, 1), vec({0}), 3, FrozenGradient{vec({1e10})});
    FAIL("expected an error");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("proxy step 1") != std::string::npos);
  }
}

TEST_CASE("parallel_step: one-step exact minimization") {
  const auto obj = quadratic(2);
  const auto opt = sgd(1.0);
  const auto c = parallel_step(obj, Batch{}, opt, {{vec({2, 0}), init_state(opt, 2)}}, {1.0}, {});
  REQUIRE(c.size() == 1);
  CHECK(c[0].grad_pre == vec({2, 0}));
  CHECK(c[0].theta_post == vec({0, 0}));
  CHECK(c[0].f_post == 0.0);
}

TEST_CASE("parallel_step: deterministic and equal to the serial reference") {
  std::mt19937_64 rng(1);
  ObjectiveSpec spec;
  spec.name = ObjectiveName::Ackley;
  spec.dim = 40;
  spec.noise_sigma = 0.3;
  const Objective obj(spec);
  OptimizerSpec adam;
  std::vector<ProxyPoint> starts;
  for (int i = 0; i < 7; ++i) starts.push_back({random_vec(rng, 40), init_state(adam, 40)});
  const std::vector<double> scales(7, 1.0);
  const auto batch = obj.make_batch(3, 5);
  for (bool gn : {false, true}) {
    const auto ref = serial::parallel_step(obj, batch, adam, starts, scales, gn);
    for (int threads : {1, 2, 8}) {
      const auto out = parallel_step(obj, batch, adam, starts, scales, {threads, gn});
      REQUIRE(out.size() == ref.size());
      for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].theta_post == ref[i].theta_post);
        CHECK(out[i].grad_pre == ref[i].grad_pre);
        CHECK(out[i].state_post == ref[i].state_post);
        CHECK(std::memcmp(&out[i].f_post, &ref[i].f_post, sizeof(double)) == 0);
        CHECK(std::memcmp(&out[i].gradnorm_post, &ref[i].gradnorm_post, sizeof(double)) == 0);
      }
    }
  }
}

TEST_CASE("parallel_step: worker failure names the worker") {
  const auto obj = quadratic(1);
  const auto opt = sgd(1.0);
  std::vector<ProxyPoint> starts{{vec({1}), init_state(opt, 1)}, {vec({NAN}), init_state(opt, 1)}};
  try {
    parallel_step(obj, Batch{}, opt, starts, {1.0, 1.0}, {2, false});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("worker 1") != std::string::npos);
  }
  CHECK_THROWS_AS(parallel_step(obj, Batch{}, opt, starts, {1.0}, {}), DimensionError);
}

TEST_CASE("select rules") {
  const std::vector<Candidate> c{with_value(0.3), with_value(0.1), with_value(0.2), with_value(0.5)};
  CHECK(select(c, Selection::MinValue) == 1);
  const std::vector<Candidate> eq{with_value(0, 2.0), with_value(0, 2.0), with_value(0, 2.0)};
  CHECK(select(eq, Selection::MinGradNorm) == 0);
  CHECK(select(c, Selection::LastCandidate) == 3);
  CHECK_THROWS_AS(select({}, Selection::MinValue), DomainError);
}

TEST_CASE("run: OptEx with N = 1 equals Vanilla bitwise") {
  for (auto name : {ObjectiveName::Quadratic, ObjectiveName::Ackley, ObjectiveName::RosenbrockPaper}) {
    auto a = setup_for(name, 4, Method::Vanilla, 1, 10, 3);
    auto b = setup_for(name, 4, Method::OptEx, 1, 10, 3);
    const auto ta = run(a);
    const auto tb = run(b);
    CHECK(ta.rows == tb.rows);
    CHECK(ta.final_theta == tb.final_theta);
  }
}

TEST_CASE("run: Target solves the quadratic right after warmup") {
  auto s = setup_for(ObjectiveName::Quadratic, 3, Method::Target, 2, 4, 0);
  s.optimizer = sgd(1.0);
  s.method.warmup = 1;
  const auto trace = run(s);
  REQUIRE(trace.failure.empty());
  CHECK(trace.rows[1].current_value <= 1e-20);
  CHECK(trace.rows[1].selected_index == 1);
}

TEST_CASE("run: bookkeeping invariants") {
  for (auto sel : {Selection::MinValue, Selection::MinGradNorm}) {
    auto s = setup_for(ObjectiveName::Ackley, 6, Method::OptEx, 4, 12, 2);
    s.method.selection = sel;
    s.method.warmup = 3;
    std::size_t prev_history = 0;
    std::int64_t prev_grads = 0;
    int iterations_seen = 0;
    const auto trace = run(s, Objective(s.objective), [&](const IterationView& v) {
      const std::size_t n = v.seq_iter <= 3 ? 1 : 4;
      CHECK(v.candidates.size() == n);
      CHECK(v.history.size() == prev_history + n);
      prev_history = v.history.size();
      for (std::size_t i = 0; i < v.candidates.size(); ++i) {
        if (sel == Selection::MinValue) CHECK(v.candidates[v.selected].f_post <= v.candidates[i].f_post);
        if (sel == Selection::MinGradNorm && n > 1)
          CHECK(v.candidates[v.selected].gradnorm_post <= v.candidates[i].gradnorm_post);
      }
      ++iterations_seen;
    });
    REQUIRE(trace.failure.empty());
    CHECK(iterations_seen == 12);
    for (std::size_t t = 0; t < trace.rows.size(); ++t) {
      const auto& r = trace.rows[t];
      if (t > 0) CHECK(r.best_value <= trace.rows[t - 1].best_value);
      const std::int64_t n = r.seq_iter <= 3 ? 1 : 4;
      CHECK(r.cum_grad_evals - prev_grads == n * (sel == Selection::MinGradNorm ? 2 : 1));
      prev_grads = r.cum_grad_evals;
      CHECK(r.wallclock_ms == 0.0);
    }
  }
}

TEST_CASE("run: LineSearch with SGD places candidates on the frozen ray") {
  auto s = setup_for(ObjectiveName::RosenbrockPaper, 5, Method::LineSearch, 4, 6, 1);
  s.optimizer = sgd(0.01);
  const Objective obj(s.objective);
  int checked = 0;
  run(s, obj, [&](const IterationView& v) {
    if (v.candidates.size() < 2) return;
    const auto& theta0 = v.candidates[0].theta_pre;
    const auto& g0 = v.candidates[0].grad_pre;
    for (std::size_t i = 0; i < v.candidates.size(); ++i)
      CHECK(v.candidates[i].theta_pre == ParamVector(theta0 - (static_cast<double>(i) * s.optimizer.lr) * g0));
    ++checked;
  });
  CHECK(checked == 4);
}

TEST_CASE("run: deterministic across thread counts") {
  auto s = setup_for(ObjectiveName::Ackley, 30, Method::OptEx, 5, 15, 9);
  s.objective.noise_sigma = 0.1;
  s.threads = 1;
  const auto a = run(s);
  s.threads = 8;
  const auto b = run(s);
  CHECK(a.rows == b.rows);
  CHECK(a.final_theta == b.final_theta);
}

TEST_CASE("run: OptEx beats Vanilla on RosenbrockPaper d = 100") {
  std::vector<double> optex, vanilla;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    optex.push_back(run(setup_for(ObjectiveName::RosenbrockPaper, 100, Method::OptEx, 5, 200, seed)).rows.back().best_value);
    vanilla.push_back(run(setup_for(ObjectiveName::RosenbrockPaper, 100, Method::Vanilla, 1, 200, seed)).rows.back().best_value);
  }
  std::sort(optex.begin(), optex.end());
  std::sort(vanilla.begin(), vanilla.end());
  CHECK(optex[2] < vanilla[2]);
}

TEST_CASE("run: failures are caught and the trace is kept") {
  auto s = setup_for(ObjectiveName::Quadratic, 2, Method::Vanilla, 1, 50, 0);
  s.optimizer = sgd(1e300);
  s.objective.L = 1e300;
  const auto trace = run(s);
  CHECK(!trace.failure.empty());
  CHECK(trace.rows.size() < 50);
}

TEST_CASE("run: rejects bad setup") {
  auto s = setup_for(ObjectiveName::Quadratic, 2, Method::OptEx, 2, 0, 0);
  CHECK_THROWS_AS(run(s), DomainError);
}
