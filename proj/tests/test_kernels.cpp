#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "optex/kernels.hpp"

using namespace optex;
using optex::testing::random_vec;
using optex::testing::vec;

namespace {

std::vector<KernelSpec> all_kernels() {
  std::vector<KernelSpec> ks;
  ks.push_back({KernelFamily::RBF, 0.7, 1.3});
  for (auto nu : {MaternNu::Half, MaternNu::ThreeHalves, MaternNu::FiveHalves})
    ks.push_back({KernelFamily::Matern, 1.4, 0.8, nu});
  return ks;
}

std::vector<const ParamVector*> ptrs(const std::vector<ParamVector>& pts) {
  std::vector<const ParamVector*> out;
  for (const auto& p : pts) out.push_back(&p);
  return out;
}

}  // namespace

TEST_CASE("kernel_eval at zero distance is the output scale") {
  std::mt19937_64 rng(1);
  const KernelSpec rbf{KernelFamily::RBF, 1.0, 1.0};
  const auto a = random_vec(rng, 4);
  CHECK(kernel_eval(rbf, a, a) == 1.0);
  for (const auto& k : all_kernels()) CHECK(kernel_eval(k, a, a) == k.output_scale);
}

TEST_CASE("kernel_eval is symmetric and bounded") {
  std::mt19937_64 rng(2);
  for (const auto& k : all_kernels()) {
    for (int i = 0; i < 50; ++i) {
      const auto a = random_vec(rng, 3, -3, 3);
      const auto b = random_vec(rng, 3, -3, 3);
      CHECK(kernel_eval(k, a, b) == kernel_eval(k, b, a));
      CHECK(std::abs(kernel_eval(k, a, b)) <= k.output_scale + 1e-12);
    }
  }
}

TEST_CASE("Matern 1/2 is the exponential kernel") {
  const KernelSpec k{KernelFamily::Matern, 1.0, 1.0, MaternNu::Half};
  CHECK(kernel_eval(k, vec({0, 0}), vec({1, 0})) == doctest::Approx(0.367879).epsilon(1e-6));
}

TEST_CASE("closed forms") {
  const double r = 0.8, l = 1.3, s = 2.0;
  const double x = r / l;
  CHECK(kernel_from_distance({KernelFamily::RBF, l, s}, r) == doctest::Approx(s * std::exp(-0.5 * x * x)));
  CHECK(kernel_from_distance({KernelFamily::Matern, l, s, MaternNu::ThreeHalves}, r) ==
        doctest::Approx(s * (1 + std::sqrt(3.0) * x) * std::exp(-std::sqrt(3.0) * x)));
  CHECK(kernel_from_distance({KernelFamily::Matern, l, s, MaternNu::FiveHalves}, r) ==
        doctest::Approx(s * (1 + std::sqrt(5.0) * x + 5.0 * x * x / 3.0) * std::exp(-std::sqrt(5.0) * x)));
}

TEST_CASE("kernel_eval rejects bad input") {
  const KernelSpec k;
  CHECK_THROWS_AS(kernel_eval(k, vec({1, 2}), vec({1})), DimensionError);
  CHECK_THROWS_AS(kernel_eval(k, vec({NAN, 2}), vec({1, 2})), DomainError);
  KernelSpec bad;
  bad.lengthscale = 0.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = KernelSpec{};
  bad.output_scale = -1.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("gram examples") {
  const KernelSpec rbf{KernelFamily::RBF, 1.0, 1.0};
  const std::vector<ParamVector> same{vec({0.3, 0.1}), vec({0.3, 0.1})};
  CHECK(gram(rbf, std::span<const ParamVector>(same)) == Matrix::Ones(2, 2));

  const KernelSpec k{KernelFamily::Matern, 1.0, 2.5};
  const std::vector<ParamVector> one{vec({1, 2, 3})};
  const Matrix g = gram(k, std::span<const ParamVector>(one));
  CHECK(g.rows() == 1);
  CHECK(g(0, 0) == 2.5);

  const std::vector<ParamVector> none;
  CHECK_THROWS_AS(gram(k, std::span<const ParamVector>(none)), DomainError);
  const std::vector<ParamVector> mixed{vec({1, 2}), vec({1})};
  CHECK_THROWS_AS(gram(k, std::span<const ParamVector>(mixed)), DimensionError);
}

TEST_CASE("gram is symmetric positive semi-definite") {
  std::mt19937_64 rng(3);
  for (const auto& k : all_kernels()) {
    for (int n : {4, 12}) {
      std::vector<ParamVector> pts;
      for (int i = 0; i < n; ++i) pts.push_back(random_vec(rng, 5));
      const Matrix g = gram(k, std::span<const ParamVector>(pts));
      CHECK(g == g.transpose());
      Eigen::SelfAdjointEigenSolver<Matrix> es(g + 1e-10 * Matrix::Identity(n, n));
      CHECK(es.eigenvalues().minCoeff() >= 0.0);
      Eigen::SelfAdjointEigenSolver<Matrix> raw(g);
      CHECK(raw.eigenvalues().minCoeff() >= -1e-8 * k.output_scale * n);
    }
  }
}

TEST_CASE("cross examples") {
  const KernelSpec rbf{KernelFamily::RBF, 1.0, 1.0};
  std::mt19937_64 rng(4);
  std::vector<ParamVector> pts{random_vec(rng, 3), random_vec(rng, 3), random_vec(rng, 3)};
  const auto c = cross(rbf, pts[0], std::span<const ParamVector>(pts));
  CHECK(c(0) == 1.0);

  const std::vector<ParamVector> none;
  CHECK_THROWS_AS(cross(rbf, pts[0], std::span<const ParamVector>(none)), DomainError);

  const ParamVector far = pts[0] + ParamVector::Constant(3, 20.0);
  const auto cf = cross(rbf, far, std::span<const ParamVector>(pts));
  CHECK(cf.maxCoeff() < 1e-8);
}

TEST_CASE("cross equals the gram row for a member point") {
  std::mt19937_64 rng(5);
  for (const auto& k : all_kernels()) {
    std::vector<ParamVector> pts;
    for (int i = 0; i < 7; ++i) pts.push_back(random_vec(rng, 4));
    const Matrix g = gram(k, std::span<const ParamVector>(pts));
    for (int i = 0; i < 7; ++i) {
      const Eigen::VectorXd c = cross(k, pts[i], std::span<const ParamVector>(pts));
      CHECK(c == Eigen::VectorXd(g.row(i).transpose()));
    }
  }
}

TEST_CASE("OpenMP gram and cross are bitwise equal to the serial reference") {
  std::mt19937_64 rng(6);
  for (const auto& k : all_kernels()) {
    std::vector<ParamVector> pts;
    for (int i = 0; i < 90; ++i) pts.push_back(random_vec(rng, 800));
    const auto p = ptrs(pts);
    const std::span<const ParamVector* const> sp(p);
    CHECK(gram(k, sp) == serial::gram(k, sp));
    const auto q = random_vec(rng, 800);
    CHECK(cross(k, q, sp) == serial::cross(k, q, sp));
  }
}

TEST_CASE("median pairwise distance") {
  const std::vector<ParamVector> pts{vec({0}), vec({1}), vec({3})};
  CHECK(median_pairwise_distance(ptrs(pts)) == 2.0);  // distances 1, 2, 3
  const std::vector<ParamVector> single{vec({0})};
  CHECK(median_pairwise_distance(ptrs(single)) == 0.0);
}
