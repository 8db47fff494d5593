#include "optex/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace optex {

using nlohmann::json;
namespace fs = std::filesystem;

bool ExperimentResult::failed() const {
  return std::any_of(runs.begin(), runs.end(), [](const RunOutcome& r) { return !r.trace.failure.empty(); });
}

Objective make_objective(const RunConfig& config) {
  std::shared_ptr<const BlobData> data;
  if (config.objective.name == ObjectiveName::LogisticBlobs) {
    if (config.data_path.empty())
      data = std::make_shared<BlobData>(BlobData::generate(config.objective.dim, config.objective.data_seed));
    else
      data = std::make_shared<BlobData>(BlobData::load_csv(config.data_path));
  }
  return Objective(config.objective, std::move(data));
}

double optimality_gap(const Objective& objective, double value) {
  const auto f_star = objective.optimum_value();
  return f_star ? value - *f_star : value;
}

fs::path default_output_dir(const RunConfig& config) {
  if (!config.output_dir.empty()) return config.output_dir;
  const char* root = std::getenv("OPTEX_OUTPUT_ROOT");
  const fs::path base = root && *root ? fs::path(root) : fs::path("runs");
  return base / config.hash();
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_number(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw Error("trace csv: bad number '" + s + "'");
  return v;
}

std::int64_t parse_int(const std::string& s) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw Error("trace csv: bad integer '" + s + "'");
  return v;
}

constexpr const char* kTraceHeader =
    "seq_iter,current_value,best_value,grad_norm,selected_index,cum_grad_evals,cum_value_evals,wallclock_ms";

std::string trace_name(Method m, std::uint64_t seed) {
  return "trace_" + to_string(m) + "_seed" + std::to_string(seed) + ".csv";
}

std::vector<double> gap_curve(const Objective& objective, const RunTrace& trace) {
  std::vector<double> gaps;
  gaps.reserve(trace.rows.size());
  for (const auto& r : trace.rows) gaps.push_back(optimality_gap(objective, r.best_value));
  return gaps;
}

// Linear-interpolated quantile; +inf entries sort last.
double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  if (lo == hi || v[lo] == v[hi]) return v[lo];
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

json number_or_marker(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

json aggregate(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  const double q1 = quantile(v, 0.25);
  const double q3 = quantile(v, 0.75);
  return {{"median", number_or_marker(quantile(v, 0.5))},
          {"mean", number_or_marker(v.empty() ? std::numeric_limits<double>::quiet_NaN()
                                              : sum / static_cast<double>(v.size()))},
          {"iqr", number_or_marker(std::isinf(q3) ? q3 : q3 - q1)}};
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed: " + path.string());
}

std::map<std::string, std::string> parse_comment(const std::string& line) {
  std::map<std::string, std::string> kv;
  std::istringstream ss(line.substr(1));
  std::string tok;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq != std::string::npos) kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(line);
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

}  // namespace

void write_trace_csv(std::ostream& out, const RunTrace& trace, const std::string& config_hash,
                     const Objective& objective) {
  const auto f_star = objective.optimum_value();
  out << "# config_hash=" << config_hash << " method=" << to_string(trace.method) << " seed=" << trace.seed
      << " objective=" << to_string(objective.spec().name) << " dim=" << objective.dim()
      << " f_star=" << (f_star ? format_number(*f_star) : "none") << " warmup=" << trace.warmup_iters << '\n';
  out << kTraceHeader << '\n';
  for (const auto& r : trace.rows) {
    out << r.seq_iter << ',' << format_number(r.current_value) << ',' << format_number(r.best_value) << ','
        << format_number(r.grad_norm) << ',' << r.selected_index << ',' << r.cum_grad_evals << ','
        << r.cum_value_evals << ',' << format_number(r.wallclock_ms) << '\n';
  }
}

ExperimentResult run_experiment(const RunConfig& config, const fs::path& dir) {
  const Objective objective = make_objective(config);
  const std::string hash = config.hash();
  fs::create_directories(dir);

  json echoed = config.to_json();
  echoed["_config_hash"] = hash;
  write_file(dir / "config.json", echoed.dump(2) + "\n");

  ExperimentResult result;
  result.dir = dir;
  std::ostringstream plot;
  plot << "# config_hash=" << hash << '\n' << "method,seed,seq_iter,optimality_gap\n";

  for (const Method m : config.methods) {
    for (int r = 0; r < config.repeats; ++r) {
      const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(r);
      RunOutcome outcome;
      outcome.method = m;
      outcome.seed = seed;
      outcome.trace = run(config.setup_for(m, seed), objective);
      const auto gaps = gap_curve(objective, outcome.trace);
      outcome.iterations_to_threshold = diag::iterations_to_threshold(gaps, config.threshold);

      std::ostringstream csv;
      write_trace_csv(csv, outcome.trace, hash, objective);
      write_file(dir / trace_name(m, seed), csv.str());
      for (std::size_t i = 0; i < gaps.size(); ++i)
        plot << to_string(m) << ',' << seed << ',' << outcome.trace.rows[i].seq_iter << ','
             << format_number(gaps[i]) << '\n';
      result.runs.push_back(std::move(outcome));
    }
  }
  write_file(dir / "plot_data.csv", plot.str());

  // Per-method medians of iterations-to-threshold; the speedup column needs vanilla.
  std::map<Method, std::optional<double>> median_iters;
  for (const Method m : config.methods) {
    std::vector<std::optional<std::int64_t>> its;
    for (const auto& o : result.runs)
      if (o.method == m) its.push_back(o.iterations_to_threshold);
    median_iters[m] = diag::median_with_inf(its);
  }
  const auto vanilla = median_iters.find(Method::Vanilla);
  const bool have_vanilla = vanilla != median_iters.end();
  const double inf = std::numeric_limits<double>::infinity();

  json runs = json::array();
  for (const auto& o : result.runs) {
    const auto& rows = o.trace.rows;
    json row = {{"method", to_string(o.method)},
                {"seed", o.seed},
                {"final_best_value", rows.empty() ? json("nan") : number_or_marker(rows.back().best_value)},
                {"iterations_to_threshold",
                 o.iterations_to_threshold ? json(*o.iterations_to_threshold) : json("inf")},
                {"grad_evals", rows.empty() ? 0 : rows.back().cum_grad_evals},
                {"value_evals", rows.empty() ? 0 : rows.back().cum_value_evals},
                {"wallclock_ms", rows.empty() ? 0.0 : rows.back().wallclock_ms},
                {"iterations_run", rows.size()},
                {"failure", o.trace.failure}};
    if (have_vanilla) {
      const double base = vanilla->second.value_or(inf);
      const double mine = o.iterations_to_threshold ? static_cast<double>(*o.iterations_to_threshold) : inf;
      row["speedup_vs_vanilla"] = std::isinf(mine) ? json("inf_marker") : number_or_marker(base / mine);
    }
    runs.push_back(std::move(row));
  }

  json methods = json::object();
  for (const Method m : config.methods) {
    std::vector<double> best, iters, grads, wall;
    for (const auto& o : result.runs) {
      if (o.method != m) continue;
      best.push_back(o.trace.rows.empty() ? std::numeric_limits<double>::quiet_NaN() : o.trace.rows.back().best_value);
      iters.push_back(o.iterations_to_threshold ? static_cast<double>(*o.iterations_to_threshold) : inf);
      grads.push_back(o.trace.rows.empty() ? 0.0 : static_cast<double>(o.trace.rows.back().cum_grad_evals));
      wall.push_back(o.trace.rows.empty() ? 0.0 : o.trace.rows.back().wallclock_ms);
    }
    json entry = {{"final_best_value", aggregate(best)},
                  {"iterations_to_threshold", aggregate(iters)},
                  {"grad_evals", aggregate(grads)},
                  {"wallclock_ms", aggregate(wall)},
                  {"reached_threshold", median_iters[m].has_value()}};
    if (have_vanilla) {
      const auto& mine = median_iters[m];
      entry["speedup_vs_vanilla"] =
          mine ? number_or_marker(vanilla->second.value_or(inf) / *mine) : json("inf_marker");
    }
    methods[to_string(m)] = std::move(entry);
  }

  const auto f_star = objective.optimum_value();
  result.summary = {{"config_hash", hash},
                    {"objective", to_string(config.objective.name)},
                    {"dim", config.objective.dim},
                    {"f_star", f_star ? json(*f_star) : json(nullptr)},
                    {"threshold", config.threshold},
                    {"runs", std::move(runs)},
                    {"methods", std::move(methods)}};
  write_file(dir / "summary.json", result.summary.dump(2) + "\n");
  return result;
}

LoadedTrace load_trace_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.empty() || line[0] != '#')
    throw Error(path.string() + ": missing header comment");
  const auto kv = parse_comment(line);
  LoadedTrace t;
  try {
    t.method = kv.at("method");
    t.seed = static_cast<std::uint64_t>(parse_int(kv.at("seed")));
    t.objective = kv.at("objective");
    t.dim = parse_int(kv.at("dim"));
    const auto& fs = kv.at("f_star");
    if (fs != "none") t.f_star = parse_number(fs);
  } catch (const std::out_of_range&) {
    throw Error(path.string() + ": header comment lacks method/seed/objective/dim/f_star");
  }
  if (!std::getline(in, line) || line != kTraceHeader) throw Error(path.string() + ": unexpected column header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 8) throw Error(path.string() + ": expected 8 columns in '" + line + "'");
    TraceRow r;
    r.seq_iter = parse_int(f[0]);
    r.current_value = parse_number(f[1]);
    r.best_value = parse_number(f[2]);
    r.grad_norm = parse_number(f[3]);
    r.selected_index = parse_int(f[4]);
    r.cum_grad_evals = parse_int(f[5]);
    r.cum_value_evals = parse_int(f[6]);
    r.wallclock_ms = parse_number(f[7]);
    t.rows.push_back(r);
  }
  return t;
}

CompareResult compare(const std::vector<fs::path>& dirs, double threshold) {
  if (dirs.empty()) throw ConfigError("compare: no directories given");
  std::vector<LoadedTrace> traces;
  for (const auto& d : dirs) {
    if (!fs::is_directory(d)) throw ConfigError("compare: not a directory: " + d.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(d)) {
      const auto name = e.path().filename().string();
      if (e.is_regular_file() && name.rfind("trace_", 0) == 0 && e.path().extension() == ".csv")
        files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("compare: no trace CSVs in " + d.string());
    for (const auto& f : files) traces.push_back(load_trace_csv(f));
  }
  for (const auto& t : traces)
    if (t.objective != traces.front().objective || t.dim != traces.front().dim)
      throw ConfigError("compare: incompatible traces (" + traces.front().objective + " d=" +
                        std::to_string(traces.front().dim) + " vs " + t.objective + " d=" + std::to_string(t.dim) +
                        ")");

  std::vector<diag::MethodTraces> grouped;
  for (const auto& t : traces) {
    auto it = std::find_if(grouped.begin(), grouped.end(), [&](const auto& g) { return g.method == t.method; });
    if (it == grouped.end()) {
      grouped.push_back({t.method, {}});
      it = std::prev(grouped.end());
    }
    std::vector<double> gaps;
    for (const auto& r : t.rows) gaps.push_back(t.f_star ? r.best_value - *t.f_star : r.best_value);
    it->gaps.push_back(std::move(gaps));
  }
  if (std::none_of(grouped.begin(), grouped.end(), [](const auto& g) { return g.method == "vanilla"; }))
    throw ConfigError("compare: a vanilla trace is required for the speedup column");

  CompareResult out;
  out.rows = diag::speedup_table(grouped, threshold);
  out.none_reached = std::none_of(out.rows.begin(), out.rows.end(), [](const auto& r) { return r.iterations; });

  std::ostringstream table, csv;
  table << std::left << std::setw(12) << "method" << std::right << std::setw(8) << "seeds" << std::setw(12)
        << "iters" << std::setw(10) << "speedup" << '\n';
  csv << "method,seeds,iterations_to_threshold,speedup\n";
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    const auto& r = out.rows[i];
    const std::string iters = r.iterations ? format_number(*r.iterations) : "inf";
    const std::string speed = r.iterations ? format_number(r.speedup) : "inf_marker";
    std::ostringstream sp;
    if (r.iterations)
      sp << std::fixed << std::setprecision(2) << r.speedup;
    else
      sp << "-";
    table << std::left << std::setw(12) << r.method << std::right << std::setw(8) << grouped[i].gaps.size()
          << std::setw(12) << iters << std::setw(10) << sp.str() << '\n';
    csv << r.method << ',' << grouped[i].gaps.size() << ',' << iters << ',' << speed << '\n';
  }
  out.table = table.str();
  out.csv = csv.str();
  return out;
}

RunConfig speedup_config(ObjectiveName name, const std::vector<std::string>& overrides) {
  std::vector<std::string> all = {
      "objective.name=" + to_string(name),
      "objective.dim=1000",
      "optimizer.family=adam",
      "optimizer.lr=0.1",
      "optimizer.beta1=0.9",
      "optimizer.beta2=0.999",
      "kernel.family=matern",
      "estimator.t0=150",
      "method.name=vanilla,optex,target",
      "method.n=5",
      "objective.init_scale=0.5",
      "run.T=300",
      "run.repeats=5",
      std::string("run.threshold=") + (name == ObjectiveName::Ackley ? "0.05" : "0.1"),
  };
  all.insert(all.end(), overrides.begin(), overrides.end());
  return parse_config_json(json::object(), all);
}

SpeedupGate speedup_gate(const RunConfig& config) {
  const Objective objective = make_objective(config);
  std::vector<diag::MethodTraces> traces;
  for (const Method m : config.methods) {
    diag::MethodTraces mt{to_string(m), {}};
    for (int r = 0; r < config.repeats; ++r) {
      const auto trace = run(config.setup_for(m, config.seed + static_cast<std::uint64_t>(r)), objective);
      if (!trace.failure.empty()) throw Error(to_string(m) + " run failed: " + trace.failure);
      mt.gaps.push_back(gap_curve(objective, trace));
    }
    traces.push_back(std::move(mt));
  }
  SpeedupGate gate;
  gate.rows = diag::speedup_table(traces, config.threshold);
  auto iters = [&](const std::string& m) -> std::optional<double> {
    for (const auto& r : gate.rows)
      if (r.method == m) return r.iterations;
    throw ConfigError("speedup gate: method '" + m + "' not configured");
  };
  const auto v = iters("vanilla"), o = iters("optex"), t = iters("target");
  const double inf = std::numeric_limits<double>::infinity();
  gate.optex_ratio = o ? (v ? *o / *v : 0.0) : inf;
  gate.target_ratio = t ? (o ? *t / *o : 0.0) : inf;
  gate.passed = o && t && gate.optex_ratio <= 0.7 && gate.target_ratio <= 1.1;
  return gate;
}

}  // namespace optex
