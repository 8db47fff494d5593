#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "optex/optimizers.hpp"

using namespace optex;
using optex::testing::random_vec;
using optex::testing::vec;

namespace {

OptimizerSpec sgd(double lr) {
  OptimizerSpec s;
  s.family = OptimizerFamily::SGD;
  s.lr = lr;
  return s;
}

}  // namespace

TEST_CASE("init_state") {
  OptimizerSpec adam;
  const auto s = init_state(adam, 3);
  CHECK(s.step_count == 0);
  CHECK(s.m == ParamVector::Zero(3));
  CHECK(s.v == ParamVector::Zero(3));
  const auto t = init_state(sgd(0.1), 1);
  CHECK(t.step_count == 0);
  CHECK_THROWS_AS(init_state(adam, 0), DomainError);
}

TEST_CASE("spec validation") {
  OptimizerSpec s;
  s.lr = 0.0;
  CHECK_THROWS_AS(s.validate(), DomainError);
  s = OptimizerSpec{};
  s.beta2 = 1.0;
  CHECK_THROWS_AS(s.validate(), DomainError);
  s = OptimizerSpec{};
  s.momentum = -0.1;
  CHECK_THROWS_AS(s.validate(), DomainError);
  s = OptimizerSpec{};
  s.eps = 0.0;
  CHECK_THROWS_AS(s.validate(), DomainError);
}

TEST_CASE("SGD steps") {
  const auto spec = sgd(0.1);
  const auto state = init_state(spec, 2);
  const auto r = step(spec, state, vec({1, 1}), vec({1, 0}));
  CHECK(r.theta(0) == doctest::Approx(0.9));
  CHECK(r.theta(1) == 1.0);
  CHECK(r.state.step_count == 1);

  const auto z = step(sgd(3.7), state, vec({0.2, -5}), vec({0, 0}));
  CHECK(z.theta == vec({0.2, -5}));
  CHECK(z.state.step_count == 1);
}

TEST_CASE("SGD linearity is exact") {
  std::mt19937_64 rng(1);
  const auto spec = sgd(0.3);
  const auto state = init_state(spec, 5);
  const ParamVector zero = ParamVector::Zero(5);
  for (double a : {0.25, 0.5, 2.0, 8.0, -4.0}) {
    const auto g = random_vec(rng, 5);
    const ParamVector d1 = step(spec, state, zero, g).theta - zero;
    const ParamVector da = step(spec, state, zero, a * g).theta - zero;
    CHECK(da == a * d1);
  }
}

TEST_CASE("momentum accumulates") {
  OptimizerSpec spec;
  spec.family = OptimizerFamily::SGDMomentum;
  spec.lr = 0.5;
  spec.momentum = 0.5;
  auto r = step(spec, init_state(spec, 1), vec({0}), vec({1}));
  CHECK(r.theta(0) == -0.5);
  r = step(spec, r.state, r.theta, vec({1}));
  CHECK(r.state.m(0) == 1.5);
  CHECK(r.theta(0) == -1.25);
}

TEST_CASE("Adam first step") {
  OptimizerSpec adam;
  const auto r = step(adam, init_state(adam, 1), vec({0}), vec({1}));
  CHECK(r.theta(0) == doctest::Approx(-0.1).epsilon(1e-7));
}

TEST_CASE("Adam first-step scale property") {
  OptimizerSpec adam;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> mag(-3.0, 3.0);
  const double eps_prime = 1e-6;
  for (int i = 0; i < 200; ++i) {
    ParamVector g(4);
    for (Eigen::Index c = 0; c < 4; ++c) {
      const double m = std::pow(10.0, mag(rng));
      g(c) = (rng() % 2 ? 1.0 : -1.0) * m;
    }
    const auto r = step(adam, init_state(adam, 4), ParamVector::Zero(4), g);
    for (Eigen::Index c = 0; c < 4; ++c) {
      const double disp = std::abs(r.theta(c));
      CHECK(disp <= adam.lr);
      CHECK(disp >= adam.lr * (1.0 - eps_prime));
    }
  }
  const auto small = step(adam, init_state(adam, 1), vec({0}), vec({1e-3}));
  CHECK(std::abs(small.theta(0)) >= adam.lr * (1.0 - eps_prime));
}

TEST_CASE("step is pure and clones branch independently") {
  std::mt19937_64 rng(3);
  for (auto fam : {OptimizerFamily::SGD, OptimizerFamily::SGDMomentum, OptimizerFamily::Adam}) {
    OptimizerSpec spec;
    spec.family = fam;
    auto state = init_state(spec, 3);
    ParamVector theta = random_vec(rng, 3);
    for (int i = 0; i < 3; ++i) {
      auto r = step(spec, state, theta, random_vec(rng, 3));
      state = r.state;
      theta = r.theta;
    }
    const OptimizerState snapshot = state;
    const OptimizerState clone = state;
    const auto g = random_vec(rng, 3);
    const auto a = step(spec, state, theta, g);
    const auto b = step(spec, clone, theta, g);
    CHECK(a.theta == b.theta);
    CHECK(a.state == b.state);
    CHECK(state == snapshot);
    CHECK(a.state.step_count == snapshot.step_count + 1);
  }
}

TEST_CASE("lr_scale multiplies the learning rate") {
  const auto spec = sgd(0.5);
  const auto r = step(spec, init_state(spec, 1), vec({0}), vec({1}), 3.0);
  CHECK(r.theta(0) == -1.5);
}

TEST_CASE("step rejects bad input") {
  OptimizerSpec adam;
  const auto s = init_state(adam, 2);
  CHECK_THROWS_AS(step(adam, s, vec({0, 0}), vec({NAN, 0})), DomainError);
  CHECK_THROWS_AS(step(adam, s, vec({0, 0}), vec({0})), DimensionError);
}
