#include "optex/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace optex {

namespace {

constexpr std::uint64_t kNoiseSalt = 0x6e6f697365ULL;
constexpr std::uint64_t kBatchSalt = 0x6261746368ULL;
constexpr std::uint64_t kInitSalt = 0x696e6974ULL;

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double ackley_value(const ParamVector& t) {
  const double d = static_cast<double>(t.size());
  const double rms = std::sqrt(t.squaredNorm() / d);
  const double cos_mean = (2.0 * std::numbers::pi * t.array()).cos().sum() / d;
  return -20.0 * std::exp(-0.2 * rms) - std::exp(cos_mean) + 20.0 + std::numbers::e;
}

ParamVector ackley_grad(const ParamVector& t) {
  if (t.norm() < 1e-12) return ParamVector::Zero(t.size());
  const double d = static_cast<double>(t.size());
  const double rms = std::sqrt(t.squaredNorm() / d);
  const double cos_mean = (2.0 * std::numbers::pi * t.array()).cos().sum() / d;
  const double radial = 4.0 * std::exp(-0.2 * rms) / (d * rms);
  const double wave = 2.0 * std::numbers::pi / d * std::exp(cos_mean);
  return (radial * t.array() + wave * (2.0 * std::numbers::pi * t.array()).sin()).matrix();
}

// (1/d) sum_{i<d} [100 (t_{i+1} - t_i)^2 + (1 - t_i)^2]
double rosen_scaled_value(const ParamVector& t) {
  const auto n = t.size();
  const auto head = t.head(n - 1).array();
  const auto tail = t.tail(n - 1).array();
  return (100.0 * (tail - head).square() + (1.0 - head).square()).sum() / static_cast<double>(n);
}

ParamVector rosen_scaled_grad(const ParamVector& t) {
  const auto n = t.size();
  ParamVector g = ParamVector::Zero(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double diff = t(i + 1) - t(i);
    g(i) += -200.0 * diff - 2.0 * (1.0 - t(i));
    g(i + 1) += 200.0 * diff;
  }
  return g / static_cast<double>(n);
}

double rosen_std_value(const ParamVector& t) {
  const auto n = t.size();
  const auto head = t.head(n - 1).array();
  const auto tail = t.tail(n - 1).array();
  return (100.0 * (tail - head.square()).square() + (1.0 - head).square()).sum();
}

ParamVector rosen_std_grad(const ParamVector& t) {
  const auto n = t.size();
  ParamVector g = ParamVector::Zero(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double diff = t(i + 1) - t(i) * t(i);
    g(i) += -400.0 * t(i) * diff - 2.0 * (1.0 - t(i));
    g(i + 1) += 200.0 * diff;
  }
  return g;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string to_string(ObjectiveName name) {
  switch (name) {
    case ObjectiveName::Ackley: return "ackley";
    case ObjectiveName::RosenbrockPaper: return "rosenbrock_paper";
    case ObjectiveName::RosenbrockStandard: return "rosenbrock_standard";
    case ObjectiveName::Quadratic: return "quadratic";
    case ObjectiveName::LogisticBlobs: return "logistic_blobs";
  }
  return "unknown";
}

void ObjectiveSpec::validate() const {
  if (dim < 1) throw DomainError("objective: dim must be >= 1");
  if ((name == ObjectiveName::RosenbrockPaper || name == ObjectiveName::RosenbrockStandard) && dim < 2)
    throw DomainError("objective: rosenbrock needs dim >= 2");
  if (!(noise_sigma >= 0.0)) throw DomainError("objective: noise_sigma must be >= 0");
  if (!(L > 0.0)) throw DomainError("objective: L must be > 0");
  if (!(init_scale >= 0.0)) throw DomainError("objective: init_scale must be >= 0");
}

BlobData BlobData::generate(Eigen::Index dim, std::uint64_t seed, std::size_t samples) {
  if (dim < 1 || samples < 2) throw DomainError("blobs: need dim >= 1 and at least 2 samples");
  std::mt19937_64 rng(mix_seed(seed, 0x626c6f62ULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  BlobData data;
  const auto n = static_cast<Eigen::Index>(samples);
  data.features.resize(n, dim);
  data.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double label = static_cast<double>(i % 2);
    const double shift = label > 0.5 ? 0.5 : -0.5;
    data.labels(i) = label;
    for (Eigen::Index j = 0; j < dim; ++j) data.features(i, j) = shift + normal(rng);
  }
  return data;
}

void BlobData::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("blobs: cannot write " + path.string());
  out.imbue(std::locale::classic());
  out.precision(17);
  for (Eigen::Index j = 0; j < features.cols(); ++j) out << "x" << j << ',';
  out << "label\n";
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) out << features(i, j) << ',';
    out << labels(i) << '\n';
  }
}

BlobData BlobData::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("blobs: cannot read " + path.string());
  in.imbue(std::locale::classic());
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    ss.imbue(std::locale::classic());
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size()) throw Error("blobs: ragged csv " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().size() < 2) throw Error("blobs: empty csv " + path.string());
  BlobData data;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto dim = static_cast<Eigen::Index>(rows.front().size()) - 1;
  data.features.resize(n, dim);
  data.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) data.features(i, j) = rows[i][j];
    data.labels(i) = rows[i][dim];
  }
  return data;
}

Objective::Objective(ObjectiveSpec spec, std::shared_ptr<const BlobData> data)
    : spec_(std::move(spec)), data_(std::move(data)) {
  spec_.validate();
  if (spec_.name == ObjectiveName::LogisticBlobs) {
    if (!data_) data_ = std::make_shared<const BlobData>(BlobData::generate(spec_.dim, spec_.data_seed));
    require_same_dim(data_->features.cols(), spec_.dim, "logistic_blobs data");
  }
}

void Objective::check(const ParamVector& theta, const char* what) const {
  require_same_dim(theta.size(), spec_.dim, what);
  require_finite(theta, what);
}

double Objective::eval_value(const ParamVector& theta, const Batch& batch) const {
  check(theta, "eval_value");
  switch (spec_.name) {
    case ObjectiveName::Ackley: return ackley_value(theta);
    case ObjectiveName::RosenbrockPaper: return rosen_scaled_value(theta);
    case ObjectiveName::RosenbrockStandard: return rosen_std_value(theta);
    case ObjectiveName::Quadratic: return 0.5 * spec_.L * theta.squaredNorm();
    case ObjectiveName::LogisticBlobs: {
      const auto& x = data_->features;
      const auto& y = data_->labels;
      double total = 0.0;
      auto row_loss = [&](Eigen::Index i) {
        const double sign = 2.0 * y(i) - 1.0;
        return softplus(-sign * x.row(i).dot(theta));
      };
      if (batch.indices.empty()) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) total += row_loss(i);
        return total / static_cast<double>(x.rows());
      }
      for (auto i : batch.indices) total += row_loss(static_cast<Eigen::Index>(i));
      return total / static_cast<double>(batch.indices.size());
    }
  }
  return 0.0;
}

ParamVector Objective::exact_grad(const ParamVector& theta, const Batch& batch) const {
  check(theta, "eval_grad");
  switch (spec_.name) {
    case ObjectiveName::Ackley: return ackley_grad(theta);
    case ObjectiveName::RosenbrockPaper: return rosen_scaled_grad(theta);
    case ObjectiveName::RosenbrockStandard: return rosen_std_grad(theta);
    case ObjectiveName::Quadratic: return spec_.L * theta;
    case ObjectiveName::LogisticBlobs: {
      const auto& x = data_->features;
      const auto& y = data_->labels;
      ParamVector g = ParamVector::Zero(theta.size());
      auto add_row = [&](Eigen::Index i) {
        const double sign = 2.0 * y(i) - 1.0;
        g.noalias() -= (sign * sigmoid(-sign * x.row(i).dot(theta))) * x.row(i).transpose();
      };
      if (batch.indices.empty()) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) add_row(i);
        return g / static_cast<double>(x.rows());
      }
      for (auto i : batch.indices) add_row(static_cast<Eigen::Index>(i));
      return g / static_cast<double>(batch.indices.size());
    }
  }
  return ParamVector::Zero(theta.size());
}

ParamVector Objective::eval_grad(const ParamVector& theta, const Batch& batch) const {
  ParamVector g = exact_grad(theta, batch);
  if (spec_.noise_sigma > 0.0) {
    std::mt19937_64 rng(mix_seed(batch.noise_key, kNoiseSalt));
    std::normal_distribution<double> normal(0.0, spec_.noise_sigma);
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) += normal(rng);
  }
  return g;
}

Batch Objective::make_batch(std::uint64_t run_seed, std::int64_t seq_iter) const {
  Batch batch;
  batch.noise_key = mix_seed(run_seed, static_cast<std::uint64_t>(seq_iter));
  if (spec_.name == ObjectiveName::LogisticBlobs) {
    const auto rows = static_cast<std::size_t>(data_->features.rows());
    if (spec_.batch_size > 0 && spec_.batch_size < rows) {
      std::vector<std::size_t> perm(rows);
      for (std::size_t i = 0; i < rows; ++i) perm[i] = i;
      std::mt19937_64 rng(mix_seed(batch.noise_key, kBatchSalt));
      for (std::size_t i = 0; i < spec_.batch_size; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, rows - 1);
        std::swap(perm[i], perm[pick(rng)]);
      }
      perm.resize(spec_.batch_size);
      std::sort(perm.begin(), perm.end());
      batch.indices = std::move(perm);
    }
  }
  return batch;
}

std::optional<double> Objective::optimum_value() const {
  if (spec_.name == ObjectiveName::LogisticBlobs) return std::nullopt;
  return 0.0;
}

std::optional<ParamVector> Objective::minimizer() const {
  switch (spec_.name) {
    case ObjectiveName::Ackley:
    case ObjectiveName::Quadratic: return ParamVector::Zero(spec_.dim);
    case ObjectiveName::RosenbrockPaper:
    case ObjectiveName::RosenbrockStandard: return ParamVector::Ones(spec_.dim);
    case ObjectiveName::LogisticBlobs: return std::nullopt;
  }
  return std::nullopt;
}

ParamVector Objective::initial_point(std::uint64_t seed) const {
  if (spec_.init_scale == 0.0) return ParamVector::Zero(spec_.dim);
  std::mt19937_64 rng(mix_seed(seed, kInitSalt));
  std::uniform_real_distribution<double> uniform(-spec_.init_scale, spec_.init_scale);
  ParamVector theta(spec_.dim);
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = uniform(rng);
  return theta;
}

}  // namespace optex
