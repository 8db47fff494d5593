#include "optex/grad_estimator.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>

namespace optex {

namespace {
std::atomic<std::size_t> g_factorizations{0};
}

GradientHistory::GradientHistory(std::optional<std::size_t> capacity) : capacity_(capacity) {
  if (capacity_ && *capacity_ == 0) throw DomainError("history: capacity must be >= 1");
}

void GradientHistory::push(GradientRecord record) {
  if (record.theta.size() != record.grad.size())
    throw DimensionError("history: theta and grad dimensions differ");
  if (!records_.empty()) {
    const auto& last = *records_.back();
    require_same_dim(record.theta.size(), last.theta.size(), "history push");
    if (record.seq_iter < last.seq_iter || (record.seq_iter == last.seq_iter && record.worker < last.worker))
      throw DomainError("history: records must arrive in (seq_iter, worker) order");
  }
  require_finite(record.theta, "history push");
  require_finite(record.grad, "history push");
  records_.push_back(std::make_shared<const GradientRecord>(std::move(record)));
  if (capacity_ && records_.size() > *capacity_) records_.pop_front();
}

void EstimatorConfig::validate() const {
  kernel.validate();
  if (!(noise_sigma2 >= 0.0)) throw DomainError("estimator: noise_sigma2 must be >= 0");
  if (!(jitter > 0.0)) throw DomainError("estimator: jitter must be > 0");
  if (t0 < 1) throw DomainError("estimator: t0 must be >= 1");
}

std::vector<RecordPtr> select_window(const GradientHistory& history, const ParamVector& theta,
                                     const EstimatorConfig& config) {
  if (history.empty()) throw DomainError("select_window: empty history");
  const auto& recs = history.records();
  const std::size_t n = std::min(config.t0, recs.size());
  if (config.window_mode == WindowMode::Recent || n == recs.size())
    return {recs.end() - static_cast<std::ptrdiff_t>(n), recs.end()};

  require_same_dim(theta.size(), recs.front()->theta.size(), "select_window");
  std::vector<double> dist(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) dist[i] = (recs[i]->theta - theta).squaredNorm();
  std::vector<std::size_t> order(recs.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) { return dist[a] != dist[b] ? dist[a] < dist[b] : a > b; });
  order.resize(n);
  std::sort(order.begin(), order.end());
  std::vector<RecordPtr> out;
  out.reserve(n);
  for (auto i : order) out.push_back(recs[i]);
  return out;
}

GradientEstimator GradientEstimator::fit(std::vector<RecordPtr> window, const EstimatorConfig& config) {
  config.validate();
  if (window.empty()) throw DomainError("fit: empty window");
  const auto d = window.front()->theta.size();
  GradientEstimator est;
  est.thetas_.reserve(window.size());
  for (const auto& r : window) {
    require_same_dim(r->theta.size(), d, "fit");
    require_same_dim(r->grad.size(), d, "fit");
    est.thetas_.push_back(&r->theta);
  }
  est.window_ = std::move(window);
  est.config_ = config;
  est.kernel_ = config.kernel;
  if (config.kernel.lengthscale_mode == LengthscaleMode::Median) {
    const double med = median_pairwise_distance(est.thetas_);
    if (med > 0.0 && std::isfinite(med)) est.kernel_.lengthscale = med;
  }

  const Matrix k = gram(est.kernel_, est.thetas_);
  const auto n = k.rows();
  const double cap = 1e-2 * est.kernel_.output_scale;
  double jitter = config.jitter;
  for (;;) {
    Matrix system = k;
    system.diagonal().array() += config.noise_sigma2 + jitter;
    Eigen::LLT<Matrix> llt(system);
    ++g_factorizations;
    const Matrix lower = llt.matrixL();
    if (llt.info() == Eigen::Success && lower.allFinite() && (lower.diagonal().array() > 0.0).all()) {
      est.factor_ = lower;
      est.jitter_used_ = jitter;
      break;
    }
    if (jitter >= cap) {
      throw EstimatorSingular("fit: kernel system of size " + std::to_string(n) +
                              " not positive definite with jitter " + std::to_string(jitter));
    }
    jitter = std::min(jitter * 10.0, cap);
  }
  return est;
}

std::size_t GradientEstimator::factorization_count() noexcept { return g_factorizations.load(); }

Eigen::VectorXd GradientEstimator::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd y = factor_.triangularView<Eigen::Lower>().solve(rhs);
  factor_.triangularView<Eigen::Lower>().transpose().solveInPlace(y);
  return y;
}

Eigen::VectorXd GradientEstimator::cross_cov(const ParamVector& theta) const {
  require_same_dim(theta.size(), static_cast<Eigen::Index>(dim()), "posterior query");
  return cross(kernel_, theta, thetas_);
}

ParamVector GradientEstimator::posterior_mean(const ParamVector& theta) const {
  const Eigen::VectorXd w = solve(cross_cov(theta));
  ParamVector mean = ParamVector::Zero(theta.size());
  for (std::size_t i = 0; i < window_.size(); ++i) mean.noalias() += w(static_cast<Eigen::Index>(i)) * window_[i]->grad;
  return mean;
}

double GradientEstimator::posterior_variance_raw(const ParamVector& theta) const {
  const Eigen::VectorXd k = cross_cov(theta);
  const Eigen::VectorXd half = factor_.triangularView<Eigen::Lower>().solve(k);
  return kernel_from_distance(kernel_, 0.0) - half.squaredNorm();
}

double GradientEstimator::posterior_variance(const ParamVector& theta) const {
  return std::max(0.0, posterior_variance_raw(theta));
}

}  // namespace optex
