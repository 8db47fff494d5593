#include "optex/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace optex {

using nlohmann::json;

namespace {

const std::vector<std::pair<std::string, json>>& defaults() {
  static const std::vector<std::pair<std::string, json>> table = {
      {"objective.name", "ackley"},
      {"objective.dim", 10},
      {"objective.noise_sigma", 0.0},
      {"objective.L", 1.0},
      {"objective.data_seed", 0},
      {"objective.batch_size", 64},
      {"objective.init_scale", 2.0},
      {"objective.data_path", ""},
      {"optimizer.family", "adam"},
      {"optimizer.lr", 0.1},
      {"optimizer.momentum", 0.9},
      {"optimizer.beta1", 0.9},
      {"optimizer.beta2", 0.999},
      {"optimizer.eps", 1e-8},
      {"kernel.family", "matern"},
      {"kernel.lengthscale", 1.0},
      {"kernel.nu", 2.5},
      {"kernel.output_scale", 1.0},
      {"kernel.lengthscale_mode", "fixed"},
      {"estimator.t0", 150},
      {"estimator.noise_sigma2", 0.0},
      {"estimator.jitter", 1e-6},
      {"estimator.window_mode", "recent"},
      {"history.capacity", 0},
      {"method.name", "optex"},
      {"method.n", 5},
      {"method.selection", "min_value"},
      {"method.warmup", 2},
      {"run.T", 100},
      {"run.seed", 0},
      {"run.threads", 1},
      {"run.repeats", 1},
      {"run.output_dir", ""},
      {"run.threshold", 1e-2},
      {"run.record_wallclock", false},
  };
  return table;
}

using Flat = std::map<std::string, json>;

void flatten(const json& node, const std::string& prefix, Flat& out) {
  for (const auto& [key, value] : node.items()) {
    if (prefix.empty() && !key.empty() && key.front() == '_') continue;  // metadata such as _config_hash
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object())
      flatten(value, path, out);
    else
      out[path] = value;
  }
}

const json& default_of(const std::string& key) {
  for (const auto& [k, v] : defaults())
    if (k == key) return v;
  throw ConfigError("unknown config key '" + key + "'");
}

json coerce(const std::string& key, const json& value) {
  const json& def = default_of(key);
  if (key == "method.name" && value.is_array()) {
    std::string joined;
    for (const auto& v : value) {
      if (!v.is_string()) throw ConfigError("method.name: expected a string or list of strings");
      joined += (joined.empty() ? "" : ",") + v.get<std::string>();
    }
    return joined;
  }
  if (def.is_boolean()) {
    if (!value.is_boolean()) throw ConfigError(key + ": expected true or false");
    return value;
  }
  if (def.is_string()) {
    if (!value.is_string()) throw ConfigError(key + ": expected a string");
    return value;
  }
  if (!value.is_number()) throw ConfigError(key + ": expected a number");
  if (def.is_number_integer()) {
    if (value.is_number_float()) {
      const double d = value.get<double>();
      if (d != static_cast<double>(static_cast<std::int64_t>(d))) throw ConfigError(key + ": expected an integer");
      return static_cast<std::int64_t>(d);
    }
    return value;
  }
  return value.get<double>();
}

json parse_override_value(const std::string& key, const std::string& text) {
  const json& def = default_of(key);
  if (def.is_string()) return text;
  if (def.is_boolean()) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + text + "'");
  }
  if (def.is_number_integer()) {
    std::int64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
      throw ConfigError(key + ": expected an integer, got '" + text + "'");
    return v;
  }
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(s);
  while (std::getline(ss, item, sep)) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

template <class Fn>
auto checked(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

OptimizerFamily parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerFamily::SGD;
  if (s == "sgd_momentum" || s == "momentum") return OptimizerFamily::SGDMomentum;
  if (s == "adam") return OptimizerFamily::Adam;
  throw ConfigError("optimizer.family: expected sgd|sgd_momentum|adam, got '" + s + "'");
}

std::string optimizer_name(OptimizerFamily f) {
  switch (f) {
    case OptimizerFamily::SGD: return "sgd";
    case OptimizerFamily::SGDMomentum: return "sgd_momentum";
    case OptimizerFamily::Adam: return "adam";
  }
  return "adam";
}

double nu_value(MaternNu nu) {
  switch (nu) {
    case MaternNu::Half: return 0.5;
    case MaternNu::ThreeHalves: return 1.5;
    case MaternNu::FiveHalves: return 2.5;
  }
  return 2.5;
}

void set_path(json& root, const std::string& dotted, const json& value) {
  json* node = &root;
  const auto parts = split(dotted, '.');
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  (*node)[parts.back()] = value;
}

}  // namespace

Method parse_method(const std::string& s) {
  if (s == "optex") return Method::OptEx;
  if (s == "vanilla") return Method::Vanilla;
  if (s == "linesearch") return Method::LineSearch;
  if (s == "target") return Method::Target;
  throw ConfigError("method.name: expected optex|vanilla|linesearch|target, got '" + s + "'");
}

Selection parse_selection(const std::string& s) {
  if (s == "min_value") return Selection::MinValue;
  if (s == "min_grad_norm") return Selection::MinGradNorm;
  if (s == "last_candidate") return Selection::LastCandidate;
  throw ConfigError("method.selection: expected min_value|min_grad_norm|last_candidate, got '" + s + "'");
}

ObjectiveName parse_objective(const std::string& s) {
  for (auto n : {ObjectiveName::Ackley, ObjectiveName::RosenbrockPaper, ObjectiveName::RosenbrockStandard,
                 ObjectiveName::Quadratic, ObjectiveName::LogisticBlobs})
    if (to_string(n) == s) return n;
  throw ConfigError(
      "objective.name: expected ackley|rosenbrock_paper|rosenbrock_standard|quadratic|logistic_blobs, got '" + s +
      "'");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, v] : defaults()) keys.push_back(k);
  return keys;
}

RunConfig parse_config_json(const json& doc, const std::vector<std::string>& overrides) {
  if (!doc.is_object() && !doc.is_null()) throw ConfigError("config: top level must be an object");
  Flat given;
  if (doc.is_object()) flatten(doc, "", given);
  Flat values;
  for (const auto& [k, v] : defaults()) values[k] = v;
  std::set<std::string> explicit_keys;
  for (const auto& [k, v] : given) {
    values[k] = coerce(k, v);
    explicit_keys.insert(k);
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
    const std::string key = o.substr(0, eq);
    values[key] = parse_override_value(key, o.substr(eq + 1));
    explicit_keys.insert(key);
  }

  auto str = [&](const char* k) { return values.at(k).get<std::string>(); };
  auto num = [&](const char* k) { return values.at(k).get<double>(); };
  auto integer = [&](const char* k) { return values.at(k).get<std::int64_t>(); };
  auto positive = [&](const char* k, std::int64_t min) {
    const auto v = integer(k);
    if (v < min) throw ConfigError(std::string(k) + ": expected >= " + std::to_string(min) + ", got " + std::to_string(v));
    return v;
  };

  RunConfig c;
  c.objective.name = parse_objective(str("objective.name"));
  c.objective.dim = positive("objective.dim", 1);
  c.objective.noise_sigma = num("objective.noise_sigma");
  c.objective.L = num("objective.L");
  c.objective.data_seed = static_cast<std::uint64_t>(positive("objective.data_seed", 0));
  c.objective.batch_size = static_cast<std::size_t>(positive("objective.batch_size", 0));
  c.objective.init_scale = num("objective.init_scale");
  c.data_path = str("objective.data_path");
  checked("objective", [&] { c.objective.validate(); });

  c.optimizer.family = parse_optimizer(str("optimizer.family"));
  c.optimizer.lr = num("optimizer.lr");
  c.optimizer.momentum = num("optimizer.momentum");
  c.optimizer.beta1 = num("optimizer.beta1");
  c.optimizer.beta2 = num("optimizer.beta2");
  c.optimizer.eps = num("optimizer.eps");
  checked("optimizer", [&] { c.optimizer.validate(); });

  auto& k = c.estimator.kernel;
  const auto fam = str("kernel.family");
  if (fam == "rbf")
    k.family = KernelFamily::RBF;
  else if (fam == "matern")
    k.family = KernelFamily::Matern;
  else
    throw ConfigError("kernel.family: expected rbf|matern, got '" + fam + "'");
  k.lengthscale = num("kernel.lengthscale");
  const double nu = num("kernel.nu");
  if (nu == 0.5)
    k.nu = MaternNu::Half;
  else if (nu == 1.5)
    k.nu = MaternNu::ThreeHalves;
  else if (nu == 2.5)
    k.nu = MaternNu::FiveHalves;
  else
    throw ConfigError("kernel.nu: expected 0.5, 1.5 or 2.5");
  k.output_scale = num("kernel.output_scale");
  const auto mode = str("kernel.lengthscale_mode");
  if (mode == "fixed")
    k.lengthscale_mode = LengthscaleMode::Fixed;
  else if (mode == "median")
    k.lengthscale_mode = LengthscaleMode::Median;
  else
    throw ConfigError("kernel.lengthscale_mode: expected fixed|median, got '" + mode + "'");

  c.estimator.t0 = static_cast<std::size_t>(positive("estimator.t0", 1));
  c.estimator.noise_sigma2 = num("estimator.noise_sigma2");
  c.estimator.jitter = num("estimator.jitter");
  const auto wm = str("estimator.window_mode");
  if (wm == "recent")
    c.estimator.window_mode = WindowMode::Recent;
  else if (wm == "nearest")
    c.estimator.window_mode = WindowMode::Nearest;
  else
    throw ConfigError("estimator.window_mode: expected recent|nearest, got '" + wm + "'");
  checked("estimator", [&] { c.estimator.validate(); });

  const auto cap = positive("history.capacity", 0);
  if (cap > 0) {
    if (static_cast<std::size_t>(cap) < c.estimator.t0)
      throw ConfigError("history.capacity: expected 0 (auto) or >= estimator.t0");
    c.history_capacity = static_cast<std::size_t>(cap);
  }

  c.methods.clear();
  for (const auto& name : split(str("method.name"), ',')) {
    const Method m = parse_method(name);
    if (std::find(c.methods.begin(), c.methods.end(), m) != c.methods.end())
      throw ConfigError("method.name: '" + name + "' listed twice");
    c.methods.push_back(m);
  }
  if (c.methods.empty()) throw ConfigError("method.name: expected at least one method");
  c.method.n = static_cast<int>(positive("method.n", 1));
  c.method.selection = parse_selection(str("method.selection"));
  c.method.warmup = static_cast<int>(positive("method.warmup", 1));
  if (c.methods.size() == 1 && c.methods.front() == Method::Vanilla) {
    if (explicit_keys.count("method.n") && c.method.n != 1)
      throw ConfigError("method.n: vanilla requires n = 1, got " + std::to_string(c.method.n));
    c.method.n = 1;
  }
  if (c.history_capacity && *c.history_capacity < static_cast<std::size_t>(c.method.n))
    throw ConfigError("history.capacity: expected >= method.n");

  c.iterations = positive("run.T", 1);
  c.seed = static_cast<std::uint64_t>(positive("run.seed", 0));
  c.threads = static_cast<int>(positive("run.threads", 1));
  c.repeats = static_cast<int>(positive("run.repeats", 1));
  c.output_dir = str("run.output_dir");
  c.threshold = num("run.threshold");
  c.record_wallclock = values.at("run.record_wallclock").get<bool>();
  return c;
}

RunConfig parse_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("config: cannot open " + file->string());
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config: " + file->string() + ": " + e.what());
    }
  }
  return parse_config_json(doc, overrides);
}

json RunConfig::to_json() const {
  json j = json::object();
  set_path(j, "objective.name", to_string(objective.name));
  set_path(j, "objective.dim", static_cast<std::int64_t>(objective.dim));
  set_path(j, "objective.noise_sigma", objective.noise_sigma);
  set_path(j, "objective.L", objective.L);
  set_path(j, "objective.data_seed", objective.data_seed);
  set_path(j, "objective.batch_size", objective.batch_size);
  set_path(j, "objective.init_scale", objective.init_scale);
  set_path(j, "objective.data_path", data_path);
  set_path(j, "optimizer.family", optimizer_name(optimizer.family));
  set_path(j, "optimizer.lr", optimizer.lr);
  set_path(j, "optimizer.momentum", optimizer.momentum);
  set_path(j, "optimizer.beta1", optimizer.beta1);
  set_path(j, "optimizer.beta2", optimizer.beta2);
  set_path(j, "optimizer.eps", optimizer.eps);
  const auto& k = estimator.kernel;
  set_path(j, "kernel.family", k.family == KernelFamily::RBF ? "rbf" : "matern");
  set_path(j, "kernel.lengthscale", k.lengthscale);
  set_path(j, "kernel.nu", nu_value(k.nu));
  set_path(j, "kernel.output_scale", k.output_scale);
  set_path(j, "kernel.lengthscale_mode", k.lengthscale_mode == LengthscaleMode::Fixed ? "fixed" : "median");
  set_path(j, "estimator.t0", estimator.t0);
  set_path(j, "estimator.noise_sigma2", estimator.noise_sigma2);
  set_path(j, "estimator.jitter", estimator.jitter);
  set_path(j, "estimator.window_mode", estimator.window_mode == WindowMode::Recent ? "recent" : "nearest");
  set_path(j, "history.capacity", history_capacity.value_or(0));
  std::string names;
  for (auto m : methods) names += (names.empty() ? "" : ",") + to_string(m);
  set_path(j, "method.name", names);
  set_path(j, "method.n", method.n);
  set_path(j, "method.selection", to_string(method.selection));
  set_path(j, "method.warmup", method.warmup);
  set_path(j, "run.T", iterations);
  set_path(j, "run.seed", seed);
  set_path(j, "run.threads", threads);
  set_path(j, "run.repeats", repeats);
  set_path(j, "run.output_dir", output_dir);
  set_path(j, "run.threshold", threshold);
  set_path(j, "run.record_wallclock", record_wallclock);
  return j;
}

std::string RunConfig::hash() const {
  // Physical knobs that never change results stay out of the hash.
  json j = to_json();
  j["run"].erase("threads");
  j["run"].erase("output_dir");
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunSetup RunConfig::setup_for(Method m, std::uint64_t run_seed) const {
  RunSetup s;
  s.objective = objective;
  s.optimizer = optimizer;
  s.estimator = estimator;
  s.method = method;
  s.method.method = m;
  s.history_capacity = history_capacity;
  s.iterations = iterations;
  s.seed = run_seed;
  s.threads = threads;
  s.record_wallclock = record_wallclock;
  return s;
}

}  // namespace optex
