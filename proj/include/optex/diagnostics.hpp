#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "optex/engine.hpp"
#include "optex/grad_estimator.hpp"
#include "optex/kernels.hpp"

namespace optex::diag {

/// Theory-only constants. Derived quantities are always recomputed from the
/// primitives so they can never drift out of sync.
struct TheoryParams {
  double delta = 0.05;
  double kappa = 1.0;
  double sigma2 = 1.0;
  double L = 1.0;
  double Delta = 1.0;  // initial optimality gap
  int n = 1;           // parallelism N
  std::size_t t0 = 150;
  double gamma = 0.0;  // information gain of the visited window

  int dim = 1;

  double alpha() const;  // d + (sqrt(d) + 1) ln(1/delta)
  double beta() const;   // max(kappa, sigma2)
  double rho() const;    // (1 - 1/N) 4 beta gamma / (sigma2 T0) + 1/N
  /// Step size sqrt(Delta / (N L T sigma2 rho)); informational only.
  double step_size(std::int64_t iterations) const;
  double variance_lower_bound() const;  // kappa / (kappa + 1/sigma2)^(T0 - 1)
  double variance_upper_bound() const;  // 4 beta gamma / (T0 d)
};

struct KronPosterior {
  ParamVector mean;
  Matrix covariance;  // d x d
};

/// Multi-output posterior built densely from (K (x) I_d) blocks and a direct
/// solve. Ground truth for the decoupled estimator; limited to n * d <= 64.
KronPosterior kron_posterior_oracle(const std::vector<GradientRecord>& window, const KernelSpec& kernel,
                                    double noise_sigma2, const ParamVector& query);

constexpr std::size_t kOracleMaxSize = 64;

/// (d/2) ln det(I + K_n / sigma^2) via a Cholesky factor.
double information_gain(const KernelSpec& kernel, const std::vector<ParamVector>& points, double sigma2, int d);

/// H(vec G_n) - H(vec G_n | vec grad_n) from dense (K_n + sigma^2 I) (x) I_d
/// Gaussian entropies; eigenvalue-based log-determinants. n * d <= 16.
double information_gain_entropy(const KernelSpec& kernel, const std::vector<ParamVector>& points, double sigma2,
                                int d);

struct VarianceCheckConfig {
  int sequences = 50;
  int max_dim = 4;
  int max_points = 30;
  std::vector<double> sigma2_values{0.01, 1.0};
  KernelSpec kernel{KernelFamily::RBF, 1.0, 1.0};
  double jitter = 1e-14;
  double tolerance = 1e-10;
  double envelope_tolerance = 1e-8;
  std::uint64_t seed = 0;
};

struct VarianceCheckReport {
  int sequences = 0;
  int checks = 0;
  int non_increasing_violations = 0;     // var_n > var_{n-1} + tol
  int lower_bound_violations = 0;        // var_n < var_{n-1} / (kappa + 1/sigma2) - tol
  int prior_bound_violations = 0;        // var > kappa
  int envelope_violations = 0;           // running mean of var_i(theta_{i+1}) above 4 beta gamma_n / (d n)
  double worst_increase = -std::numeric_limits<double>::infinity();
  double worst_lower_gap = std::numeric_limits<double>::infinity();

  bool passed() const {
    return non_increasing_violations == 0 && lower_bound_violations == 0 && prior_bound_violations == 0 &&
           envelope_violations == 0;
  }
};

/// Grows random windows one record at a time and checks the posterior
/// variance monotonicity, its per-step lower bound and the averaged upper
/// envelope against the information gain of the same points.
VarianceCheckReport check_variance_properties(const VarianceCheckConfig& config);

struct ErrorVsT0Config {
  KernelSpec kernel{KernelFamily::RBF, 1.0, 1.0};
  double sigma2 = 0.01;
  int dim = 2;
  std::vector<std::size_t> t0_grid{10, 30, 100};
  int trials = 50;
  std::uint64_t seed = 0;
  int queries = 20;
  double box = 2.0;             // points uniform in [0, box]^d
  bool held_out = true;         // false: queries are the first observed points
  double jitter = 1e-10;
  int threads = 1;
};

struct ErrorVsT0Row {
  std::size_t t0 = 0;
  double median_error = 0.0;
};

struct ErrorVsT0Result {
  std::vector<ErrorVsT0Row> rows;
  std::vector<std::vector<double>> per_trial;  // [trial][grid index] mean error over queries
  /// Fraction of consecutive grid pairs whose median does not increase.
  double monotone_fraction() const;
};

constexpr std::size_t kFieldMaxPoints = 512;
constexpr int kFieldMaxDim = 8;

/// Samples a gradient field from the GP prior (exact joint sampling, one
/// independent draw per output coordinate), observes it with N(0, sigma^2)
/// noise and measures ||grad F(q) - mu(q)|| for nested windows of each size.
ErrorVsT0Result error_vs_t0(const ErrorVsT0Config& config);

struct OracleCheckReport {
  int instances = 0;
  double worst_mean_rel = 0.0;
  double worst_var_rel = 0.0;
  double tolerance = 1e-8;
  bool passed() const { return worst_mean_rel <= tolerance && worst_var_rel <= tolerance; }
};

/// Random windows (d in {1,2,3}, n in 1..5, RBF and Matern, sigma2 in {0, 0.5})
/// compared against `kron_posterior_oracle`. Relative errors are measured
/// against max(1, |oracle|) so near-zero entries do not dominate.
OracleCheckReport check_decoupled_vs_oracle(int instances, std::uint64_t seed);

struct InfoGainReport {
  int instances = 0;
  double worst_rel = 0.0;
  double tolerance = 1e-8;
  bool passed() const { return worst_rel <= tolerance; }
};

/// `information_gain` against `information_gain_entropy` at n * d <= 16.
InfoGainReport check_information_gain(int instances, std::uint64_t seed);

struct GradientCheckReport {
  int points = 0;
  double worst_rel = 0.0;
  std::string worst_objective;
  double tolerance = 1e-5;
  bool passed() const { return worst_rel <= tolerance; }
};

/// Central differences (step h) of every objective at random points, d <= 10.
/// Error is ||g - g_fd|| / max(1, ||g_fd||).
GradientCheckReport check_gradients(int points_per_objective, std::uint64_t seed, double h = 1e-6);

struct SpeedupRow {
  std::string method;
  std::optional<double> iterations;  // median over seeds; nullopt: never reached
  double speedup = 0.0;               // vanilla / method; 0 when unreached
};

/// First 1-based index with gap <= threshold.
std::optional<std::int64_t> iterations_to_threshold(const std::vector<double>& gaps, double threshold);

struct MethodTraces {
  std::string method;
  std::vector<std::vector<double>> gaps;  // one best-gap curve per seed
};

/// Median (across seeds) iterations-to-threshold per method and speedup vs
/// the "vanilla" entry. Unreached seeds count as +inf in the median.
std::vector<SpeedupRow> speedup_table(const std::vector<MethodTraces>& traces, double threshold);

/// Median of values where nullopt counts as +inf; nullopt when the median is inf.
std::optional<double> median_with_inf(const std::vector<std::optional<std::int64_t>>& values);

}  // namespace optex::diag
