#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "helpers.hpp"
#include "optex/diagnostics.hpp"

using namespace optex;
using namespace optex::diag;
using optex::testing::random_vec;
using optex::testing::vec;

TEST_CASE("theory params derive from primitives") {
  TheoryParams p;
  p.dim = 4;
  p.delta = 0.1;
  p.kappa = 2.0;
  p.sigma2 = 0.5;
  p.n = 4;
  p.t0 = 10;
  p.gamma = 3.0;
  CHECK(p.alpha() == doctest::Approx(4 + 3 * std::log(10.0)));
  CHECK(p.beta() == 2.0);
  CHECK(p.rho() == doctest::Approx(0.75 * 4 * 2 * 3 / (0.5 * 10) + 0.25));
  p.sigma2 = 4.0;
  CHECK(p.beta() == 4.0);  // recomputed, not cached
  CHECK(p.variance_upper_bound() == doctest::Approx(4 * 4.0 * 3.0 / (10 * 4)));
  CHECK(std::isfinite(p.step_size(100)));
}

TEST_CASE("oracle: scalar closed form") {
  const KernelSpec rbf{KernelFamily::RBF, 1.0, 1.0};
  const std::vector<GradientRecord> w{{vec({0.4}), vec({2}), 0, 0}};
  const auto o = kron_posterior_oracle(w, rbf, 1.0, vec({0.4}));
  CHECK(o.mean(0) == doctest::Approx(1.0));
  CHECK(o.covariance(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("oracle: far query recovers the zero prior mean") {
  const KernelSpec rbf{KernelFamily::RBF, 1.0, 1.0};
  std::mt19937_64 rng(1);
  std::vector<GradientRecord> w;
  for (int i = 0; i < 4; ++i) w.push_back({random_vec(rng, 2), random_vec(rng, 2), i, 0});
  CHECK(kron_posterior_oracle(w, rbf, 0.1, vec({50, 50})).mean.norm() < 1e-12);
}

TEST_CASE("oracle: size limit") {
  std::vector<GradientRecord> w;
  for (int i = 0; i < 17; ++i) w.push_back({ParamVector::Constant(4, i), ParamVector::Zero(4), i, 0});
  CHECK_THROWS_AS(kron_posterior_oracle(w, KernelSpec{}, 0.1, ParamVector::Zero(4)), DomainError);
}

TEST_CASE("decoupled posterior matches the oracle on 100 instances") {
  const auto r = check_decoupled_vs_oracle(100, 11);
  CHECK(r.instances == 100);
  CHECK(r.passed());
}

TEST_CASE("information gain examples") {
  const KernelSpec rbf{KernelFamily::RBF, 1.0, 1.0};
  CHECK(information_gain(rbf, {vec({0})}, 1.0, 1) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));
  const KernelSpec k3{KernelFamily::RBF, 1.0, 3.0};
  CHECK(information_gain(k3, {vec({0, 0})}, 1.0, 2) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK_THROWS_AS(information_gain(rbf, {vec({0})}, 0.0, 1), DomainError);
}

TEST_CASE("information gain matches the entropy oracle") {
  const auto r = check_information_gain(50, 5);
  CHECK(r.instances == 50);
  CHECK(r.passed());
}

TEST_CASE("variance properties over random growth sequences") {
  VarianceCheckConfig c;
  c.seed = 3;
  const auto r = check_variance_properties(c);
  CHECK(r.sequences == 50);
  CHECK(r.checks > 0);
  CHECK(r.non_increasing_violations == 0);
  CHECK(r.lower_bound_violations == 0);
  CHECK(r.prior_bound_violations == 0);
  CHECK(r.envelope_violations == 0);
}

TEST_CASE("error vs T0 shrinks for both kernel families") {
  for (auto family : {KernelFamily::RBF, KernelFamily::Matern}) {
    ErrorVsT0Config c;
    c.kernel.family = family;
    c.t0_grid = {10, 100};
    const auto r = error_vs_t0(c);
    REQUIRE(r.rows.size() == 2);
    CHECK(r.rows[1].median_error < r.rows[0].median_error);
    CHECK(r.per_trial.size() == 50);
  }
}

TEST_CASE("error vs T0 preconditions") {
  ErrorVsT0Config c;
  c.t0_grid = {0, 10};
  CHECK_THROWS_AS(error_vs_t0(c), DomainError);
  c.t0_grid = {30, 10};
  CHECK_THROWS_AS(error_vs_t0(c), DomainError);
  c.t0_grid = {10, 1000};
  CHECK_THROWS_AS(error_vs_t0(c), DomainError);
  c.t0_grid = {10};
  c.dim = 9;
  CHECK_THROWS_AS(error_vs_t0(c), DomainError);
}

TEST_CASE("error vs T0 interpolates observed points without noise") {
  ErrorVsT0Config c;
  c.sigma2 = 0.0;
  c.held_out = false;
  c.trials = 10;
  c.t0_grid = {10, 30, 100};
  const auto r = error_vs_t0(c);
  for (const auto& row : r.rows) CHECK(row.median_error <= 1e-5);
}

TEST_CASE("error vs T0 is reproducible and thread-count independent") {
  ErrorVsT0Config c;
  c.trials = 12;
  const auto a = error_vs_t0(c);
  c.threads = 4;
  const auto b = error_vs_t0(c);
  CHECK(a.per_trial == b.per_trial);
}

TEST_CASE("monotone fraction") {
  ErrorVsT0Result r;
  r.rows = {{10, 3.0}, {30, 2.0}, {100, 2.5}};
  CHECK(r.monotone_fraction() == 0.5);
}

TEST_CASE("iterations to threshold and speedup") {
  CHECK(*iterations_to_threshold({10, 5, 1, 0.5}, 1.0) == 3);
  CHECK(!iterations_to_threshold({10, 5}, 1.0));

  const std::vector<double> v40(40, 2.0), v20(20, 2.0);
  auto curve = [](int hit) {
    std::vector<double> g(100, 5.0);
    for (int i = hit - 1; i < 100; ++i) g[static_cast<std::size_t>(i)] = 0.5;
    return g;
  };
  const std::vector<MethodTraces> traces{{"vanilla", {curve(40)}}, {"optex", {curve(20)}}, {"never", {v40}}};
  const auto rows = speedup_table(traces, 1.0);
  CHECK(*rows[0].iterations == 40);
  CHECK(rows[1].speedup == 2.0);
  CHECK(!rows[2].iterations);
  CHECK_THROWS_AS(speedup_table({{"optex", {curve(20)}}}, 1.0), DomainError);
}

TEST_CASE("median with unreached seeds") {
  CHECK(*median_with_inf({3, 5, std::nullopt}) == 5.0);
  CHECK(!median_with_inf({3, std::nullopt, std::nullopt}));
  CHECK(*median_with_inf({4, 6}) == 5.0);
}

TEST_CASE("gradient check covers every objective") {
  const auto r = check_gradients(20, 1);
  CHECK(r.points == 100);
  CHECK(r.passed());
}
