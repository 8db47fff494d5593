#include "optex/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "optex/objectives.hpp"

namespace optex::diag {

double TheoryParams::alpha() const {
  const double d = static_cast<double>(dim);
  return d + (std::sqrt(d) + 1.0) * std::log(1.0 / delta);
}

double TheoryParams::beta() const { return std::max(kappa, sigma2); }

double TheoryParams::rho() const {
  const double inv_n = 1.0 / static_cast<double>(n);
  return (1.0 - inv_n) * 4.0 * beta() * gamma / (sigma2 * static_cast<double>(t0)) + inv_n;
}

double TheoryParams::step_size(std::int64_t iterations) const {
  return std::sqrt(Delta / (static_cast<double>(n) * L * static_cast<double>(iterations) * sigma2 * rho()));
}

double TheoryParams::variance_lower_bound() const {
  return kappa / std::pow(kappa + 1.0 / sigma2, static_cast<double>(t0) - 1.0);
}

double TheoryParams::variance_upper_bound() const {
  return 4.0 * beta() * gamma / (static_cast<double>(t0) * static_cast<double>(dim));
}

KronPosterior kron_posterior_oracle(const std::vector<GradientRecord>& window, const KernelSpec& kernel,
                                    double noise_sigma2, const ParamVector& query) {
  if (window.empty()) throw DomainError("kron oracle: empty window");
  const Eigen::Index d = query.size();
  const auto n = static_cast<Eigen::Index>(window.size());
  if (static_cast<std::size_t>(n * d) > kOracleMaxSize)
    throw DomainError("kron oracle: n * d = " + std::to_string(n * d) + " exceeds " +
                      std::to_string(kOracleMaxSize));
  for (const auto& r : window) {
    require_same_dim(r.theta.size(), d, "kron oracle");
    require_same_dim(r.grad.size(), d, "kron oracle");
  }

  // Block (tau, tau') of U is k(theta_tau, theta_tau') I_d; block tau of V is k(query, theta_tau) I_d.
  const Eigen::Index nd = n * d;
  Matrix u = Matrix::Zero(nd, nd);
  Matrix v = Matrix::Zero(nd, d);
  Eigen::VectorXd y(nd);
  for (Eigen::Index a = 0; a < n; ++a) {
    y.segment(a * d, d) = window[a].grad;
    const double kq = kernel_eval(kernel, query, window[a].theta);
    for (Eigen::Index c = 0; c < d; ++c) v(a * d + c, c) = kq;
    for (Eigen::Index b = 0; b < n; ++b) {
      const double kab = kernel_eval(kernel, window[a].theta, window[b].theta);
      for (Eigen::Index c = 0; c < d; ++c) u(a * d + c, b * d + c) = kab;
    }
  }
  u.diagonal().array() += noise_sigma2;
  const auto lu = u.fullPivLu();
  KronPosterior out;
  out.mean = v.transpose() * lu.solve(y);
  out.covariance = kernel_eval(kernel, query, query) * Matrix::Identity(d, d) - v.transpose() * lu.solve(v);
  return out;
}

double information_gain(const KernelSpec& kernel, const std::vector<ParamVector>& points, double sigma2, int d) {
  if (!(sigma2 > 0.0)) throw DomainError("information_gain: sigma2 must be > 0");
  if (d < 1) throw DomainError("information_gain: d must be >= 1");
  Matrix m = gram(kernel, std::span<const ParamVector>(points)) / sigma2;
  m.diagonal().array() += 1.0;
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw EstimatorSingular("information_gain: factorization failed");
  const Matrix lower = llt.matrixL();
  return 0.5 * static_cast<double>(d) * 2.0 * lower.diagonal().array().log().sum();
}

double information_gain_entropy(const KernelSpec& kernel, const std::vector<ParamVector>& points, double sigma2,
                                int d) {
  if (!(sigma2 > 0.0)) throw DomainError("information_gain: sigma2 must be > 0");
  const auto n = static_cast<Eigen::Index>(points.size());
  const Eigen::Index nd = n * d;
  if (nd > 16) throw DomainError("information_gain_entropy: n * d exceeds 16");
  Matrix joint = Matrix::Zero(nd, nd);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      const double kab = kernel_eval(kernel, points[a], points[b]) + (a == b ? sigma2 : 0.0);
      for (Eigen::Index c = 0; c < d; ++c) joint(a * d + c, b * d + c) = kab;
    }
  const double two_pi_e = 2.0 * std::numbers::pi * std::numbers::e;
  auto entropy = [&](const Matrix& cov) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov, Eigen::EigenvaluesOnly);
    return 0.5 * (two_pi_e * es.eigenvalues().array()).log().sum();
  };
  const Matrix conditional = sigma2 * Matrix::Identity(nd, nd);
  return entropy(joint) - entropy(conditional);
}

namespace {

std::vector<ParamVector> uniform_points(std::mt19937_64& rng, std::size_t count, int d, double box) {
  std::uniform_real_distribution<double> u(0.0, box);
  std::vector<ParamVector> pts(count, ParamVector(d));
  for (auto& p : pts)
    for (Eigen::Index c = 0; c < d; ++c) p(c) = u(rng);
  return pts;
}

std::vector<RecordPtr> records_for(const std::vector<ParamVector>& pts, std::size_t count,
                                   const std::vector<ParamVector>* grads = nullptr) {
  std::vector<RecordPtr> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    GradientRecord r;
    r.theta = pts[i];
    r.grad = grads ? (*grads)[i] : ParamVector::Zero(pts[i].size());
    r.seq_iter = static_cast<std::int64_t>(i);
    out.push_back(std::make_shared<const GradientRecord>(std::move(r)));
  }
  return out;
}

}  // namespace

VarianceCheckReport check_variance_properties(const VarianceCheckConfig& config) {
  if (config.sigma2_values.empty()) throw DomainError("variance check: no sigma2 values");
  VarianceCheckReport report;
  const double kappa = config.kernel.output_scale;
  for (int s = 0; s < config.sequences; ++s) {
    std::mt19937_64 rng(mix_seed(config.seed, static_cast<std::uint64_t>(s)));
    const int d = std::uniform_int_distribution<int>(1, config.max_dim)(rng);
    const int n = std::uniform_int_distribution<int>(2, config.max_points)(rng);
    const double sigma2 = config.sigma2_values[static_cast<std::size_t>(s) % config.sigma2_values.size()];
    const auto pts = uniform_points(rng, static_cast<std::size_t>(n) + 1, d, 2.0);
    const ParamVector& query = pts.back();

    EstimatorConfig ec;
    ec.kernel = config.kernel;
    ec.noise_sigma2 = sigma2;
    ec.jitter = config.jitter;
    ec.t0 = static_cast<std::size_t>(n);

    const double shrink = 1.0 / (kappa + 1.0 / sigma2);
    double prev = kappa;           // prior variance at the query
    double sum_next_var = kappa;   // var_0(theta_1) = kappa
    for (int m = 1; m <= n; ++m) {
      const auto est = GradientEstimator::fit(records_for(pts, static_cast<std::size_t>(m)), ec);
      const double var = est.posterior_variance(query);
      ++report.checks;
      report.worst_increase = std::max(report.worst_increase, var - prev);
      report.worst_lower_gap = std::min(report.worst_lower_gap, var - prev * shrink);
      if (var > prev + config.tolerance) ++report.non_increasing_violations;
      if (var < prev * shrink - config.tolerance) ++report.lower_bound_violations;
      if (var > kappa + config.tolerance) ++report.prior_bound_violations;
      prev = var;

      // Running mean over i < m of var_i(theta_{i+1}) against 4 beta gamma_m / (d m).
      const std::vector<ParamVector> visited(pts.begin(), pts.begin() + m);
      const double gamma = information_gain(config.kernel, visited, sigma2, d);
      const double envelope = 4.0 * std::max(kappa, sigma2) * gamma / (static_cast<double>(d) * m);
      if (sum_next_var / m > envelope + config.envelope_tolerance) ++report.envelope_violations;
      if (m < n) sum_next_var += est.posterior_variance(pts[static_cast<std::size_t>(m)]);
    }
    ++report.sequences;
  }
  return report;
}

double ErrorVsT0Result::monotone_fraction() const {
  if (rows.size() < 2) return 1.0;
  std::size_t ok = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].median_error <= rows[i - 1].median_error) ++ok;
  return static_cast<double>(ok) / static_cast<double>(rows.size() - 1);
}

namespace {
double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}
}  // namespace

ErrorVsT0Result error_vs_t0(const ErrorVsT0Config& config) {
  if (config.t0_grid.empty()) throw DomainError("error_vs_t0: empty T0 grid");
  for (std::size_t i = 0; i < config.t0_grid.size(); ++i) {
    if (config.t0_grid[i] < 1) throw DomainError("error_vs_t0: T0 must be >= 1");
    if (i > 0 && config.t0_grid[i] < config.t0_grid[i - 1]) throw DomainError("error_vs_t0: T0 grid must be ascending");
  }
  if (config.dim < 1 || config.dim > kFieldMaxDim) throw DomainError("error_vs_t0: dim out of range");
  if (config.trials < 1 || config.queries < 1) throw DomainError("error_vs_t0: trials and queries must be >= 1");
  const std::size_t max_t0 = config.t0_grid.back();
  const std::size_t queries = config.held_out ? static_cast<std::size_t>(config.queries)
                                              : std::min<std::size_t>(config.queries, config.t0_grid.front());
  const std::size_t total = max_t0 + (config.held_out ? queries : 0);
  if (total > kFieldMaxPoints) throw DomainError("error_vs_t0: point count exceeds field sampling limit");

  EstimatorConfig ec;
  ec.kernel = config.kernel;
  ec.noise_sigma2 = config.sigma2;
  ec.jitter = config.jitter;
  ec.t0 = max_t0;

  ErrorVsT0Result result;
  result.per_trial.assign(static_cast<std::size_t>(config.trials), std::vector<double>(config.t0_grid.size()));
  std::vector<std::string> errors(static_cast<std::size_t>(config.trials));

#pragma omp parallel for schedule(dynamic) num_threads(config.threads > 0 ? config.threads : 1)
  for (int trial = 0; trial < config.trials; ++trial) {
    try {
      std::mt19937_64 rng(mix_seed(config.seed, static_cast<std::uint64_t>(trial)));
      std::normal_distribution<double> normal(0.0, 1.0);
      const auto pts = uniform_points(rng, total, config.dim, config.box);

      // Exact joint draw of each output coordinate: field = U sqrt(max(lambda, 0)) z.
      Eigen::SelfAdjointEigenSolver<Matrix> es(serial::gram(config.kernel, [&] {
        std::vector<const ParamVector*> p;
        for (const auto& x : pts) p.push_back(&x);
        return p;
      }()));
      const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
      Matrix field(static_cast<Eigen::Index>(total), config.dim);
      for (int c = 0; c < config.dim; ++c) {
        Eigen::VectorXd z(static_cast<Eigen::Index>(total));
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
        field.col(c) = es.eigenvectors() * root.cwiseProduct(z);
      }
      const double noise_sd = std::sqrt(config.sigma2);
      std::vector<ParamVector> observed(max_t0);
      for (std::size_t i = 0; i < max_t0; ++i) {
        observed[i] = field.row(static_cast<Eigen::Index>(i)).transpose();
        for (Eigen::Index c = 0; c < config.dim; ++c) observed[i](c) += noise_sd * normal(rng);
      }
      const std::size_t query_offset = config.held_out ? max_t0 : 0;
      const auto all_records = records_for(pts, max_t0, &observed);

      for (std::size_t g = 0; g < config.t0_grid.size(); ++g) {
        const std::vector<RecordPtr> window(all_records.begin(),
                                            all_records.begin() + static_cast<std::ptrdiff_t>(config.t0_grid[g]));
        const auto est = GradientEstimator::fit(window, ec);
        double err = 0.0;
        for (std::size_t q = 0; q < queries; ++q) {
          const std::size_t idx = query_offset + q;
          const ParamVector truth = field.row(static_cast<Eigen::Index>(idx)).transpose();
          err += (truth - est.posterior_mean(pts[idx])).norm();
        }
        result.per_trial[static_cast<std::size_t>(trial)][g] = err / static_cast<double>(queries);
      }
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(trial)] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty()) throw Error("error_vs_t0: trial " + std::to_string(i) + ": " + errors[i]);

  for (std::size_t g = 0; g < config.t0_grid.size(); ++g) {
    std::vector<double> column;
    column.reserve(result.per_trial.size());
    for (const auto& row : result.per_trial) column.push_back(row[g]);
    result.rows.push_back({config.t0_grid[g], median(std::move(column))});
  }
  return result;
}

std::optional<std::int64_t> iterations_to_threshold(const std::vector<double>& gaps, double threshold) {
  for (std::size_t i = 0; i < gaps.size(); ++i)
    if (gaps[i] <= threshold) return static_cast<std::int64_t>(i + 1);
  return std::nullopt;
}

std::optional<double> median_with_inf(const std::vector<std::optional<std::int64_t>>& values) {
  if (values.empty()) return std::nullopt;
  std::vector<double> v;
  v.reserve(values.size());
  for (const auto& x : values)
    v.push_back(x ? static_cast<double>(*x) : std::numeric_limits<double>::infinity());
  const double m = median(std::move(v));
  if (std::isinf(m)) return std::nullopt;
  return m;
}

std::vector<SpeedupRow> speedup_table(const std::vector<MethodTraces>& traces, double threshold) {
  const auto vanilla = std::find_if(traces.begin(), traces.end(), [](const auto& t) { return t.method == "vanilla"; });
  if (vanilla == traces.end()) throw DomainError("speedup_table: a vanilla trace is required");

  auto median_iters = [&](const MethodTraces& mt) {
    std::vector<std::optional<std::int64_t>> its;
    its.reserve(mt.gaps.size());
    for (const auto& g : mt.gaps) its.push_back(iterations_to_threshold(g, threshold));
    return median_with_inf(its);
  };
  const auto base = median_iters(*vanilla);
  std::vector<SpeedupRow> rows;
  for (const auto& mt : traces) {
    SpeedupRow row;
    row.method = mt.method;
    row.iterations = median_iters(mt);
    if (row.iterations)
      row.speedup = base ? *base / *row.iterations : std::numeric_limits<double>::infinity();
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

// Uniform points in [0, 2]^d kept at least min_sep apart so the Gram matrix stays well conditioned.
std::vector<ParamVector> separated_points(std::mt19937_64& rng, std::size_t count, int d, double min_sep) {
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<ParamVector> pts;
  while (pts.size() < count) {
    ParamVector p(d);
    for (Eigen::Index c = 0; c < d; ++c) p(c) = u(rng);
    const bool ok = std::all_of(pts.begin(), pts.end(), [&](const auto& q) { return (p - q).norm() >= min_sep; });
    if (ok) pts.push_back(std::move(p));
  }
  return pts;
}

KernelSpec random_kernel(std::mt19937_64& rng, bool matern) {
  std::uniform_real_distribution<double> u(0.5, 2.0);
  KernelSpec k;
  k.family = matern ? KernelFamily::Matern : KernelFamily::RBF;
  k.lengthscale = u(rng);
  k.output_scale = u(rng);
  const MaternNu nus[] = {MaternNu::Half, MaternNu::ThreeHalves, MaternNu::FiveHalves};
  k.nu = nus[std::uniform_int_distribution<int>(0, 2)(rng)];
  return k;
}

}  // namespace

OracleCheckReport check_decoupled_vs_oracle(int instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  OracleCheckReport report;
  for (int i = 0; i < instances; ++i) {
    const int d = 1 + i % 3;
    const int n = 1 + static_cast<int>(rng() % 5);
    const KernelSpec kernel = random_kernel(rng, i % 2 == 1);
    const double sigma2 = (i / 2) % 2 == 0 ? 0.0 : 0.5;

    auto pts = separated_points(rng, static_cast<std::size_t>(n) + 1, d, 0.2);
    const ParamVector query = pts.back();
    pts.pop_back();
    std::vector<ParamVector> grads(pts.size(), ParamVector(d));
    for (auto& g : grads)
      for (Eigen::Index c = 0; c < d; ++c) g(c) = normal(rng);

    EstimatorConfig ec;
    ec.kernel = kernel;
    ec.noise_sigma2 = sigma2;
    ec.jitter = 1e-12;
    ec.t0 = static_cast<std::size_t>(n);
    const auto est = GradientEstimator::fit(records_for(pts, pts.size(), &grads), ec);

    std::vector<GradientRecord> window;
    for (const auto& r : est.window()) window.push_back(*r);
    // Both sides factor the same regularized system.
    const auto oracle = kron_posterior_oracle(window, kernel, sigma2 + est.jitter_used(), query);

    const ParamVector mean = est.posterior_mean(query);
    const double var = est.posterior_variance_raw(query);
    const double mean_err = (mean - oracle.mean).norm() / std::max(1.0, oracle.mean.norm());
    const Matrix var_diff = oracle.covariance - var * Matrix::Identity(d, d);
    const double var_err = var_diff.cwiseAbs().maxCoeff() / std::max(kernel.output_scale, std::abs(var));
    report.worst_mean_rel = std::max(report.worst_mean_rel, mean_err);
    report.worst_var_rel = std::max(report.worst_var_rel, var_err);
    ++report.instances;
  }
  return report;
}

InfoGainReport check_information_gain(int instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> s2(0.05, 2.0);
  InfoGainReport report;
  for (int i = 0; i < instances; ++i) {
    const int d = 1 + static_cast<int>(rng() % 4);
    const int max_n = std::max(1, 16 / d);
    const int n = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_n));
    const KernelSpec kernel = random_kernel(rng, i % 2 == 1);
    const double sigma2 = s2(rng);
    const auto pts = uniform_points(rng, static_cast<std::size_t>(n), d, 2.0);
    const double formula = information_gain(kernel, pts, sigma2, d);
    const double oracle = information_gain_entropy(kernel, pts, sigma2, d);
    report.worst_rel = std::max(report.worst_rel, std::abs(formula - oracle) / std::max(std::abs(oracle), 1e-300));
    ++report.instances;
  }
  return report;
}

GradientCheckReport check_gradients(int points_per_objective, std::uint64_t seed, double h) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  GradientCheckReport report;
  const ObjectiveName names[] = {ObjectiveName::Ackley, ObjectiveName::RosenbrockPaper,
                                 ObjectiveName::RosenbrockStandard, ObjectiveName::Quadratic,
                                 ObjectiveName::LogisticBlobs};
  for (const auto name : names) {
    for (int p = 0; p < points_per_objective; ++p) {
      ObjectiveSpec spec;
      spec.name = name;
      spec.dim = 2 + static_cast<Eigen::Index>(rng() % 9);
      spec.L = 2.0;
      spec.batch_size = 0;
      std::shared_ptr<const BlobData> data;
      if (name == ObjectiveName::LogisticBlobs)
        data = std::make_shared<BlobData>(BlobData::generate(spec.dim, seed + static_cast<std::uint64_t>(p), 200));
      const Objective obj(spec, data);
      const Batch batch = obj.make_batch(seed, p + 1);
      ParamVector theta(spec.dim);
      for (Eigen::Index c = 0; c < spec.dim; ++c) theta(c) = u(rng);

      const ParamVector g = obj.exact_grad(theta, batch);
      ParamVector fd(spec.dim);
      for (Eigen::Index c = 0; c < spec.dim; ++c) {
        ParamVector plus = theta, minus = theta;
        plus(c) += h;
        minus(c) -= h;
        fd(c) = (obj.eval_value(plus, batch) - obj.eval_value(minus, batch)) / (2.0 * h);
      }
      const double err = (g - fd).norm() / std::max(1.0, fd.norm());
      if (err > report.worst_rel) {
        report.worst_rel = err;
        report.worst_objective = to_string(name);
      }
      ++report.points;
    }
  }
  return report;
}

}  // namespace optex::diag
