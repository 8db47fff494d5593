// Serial reference vs OpenMP paths for the two parallel hot spots.

#include <benchmark/benchmark.h>

#include <random>

#include "optex/engine.hpp"
#include "optex/kernels.hpp"

using namespace optex;

namespace {

std::vector<ParamVector> points(int n, int d) {
  std::mt19937_64 rng(0);
  std::normal_distribution<double> normal;
  std::vector<ParamVector> out(static_cast<std::size_t>(n), ParamVector(d));
  for (auto& p : out)
    for (int i = 0; i < d; ++i) p(i) = normal(rng);
  return out;
}

std::vector<const ParamVector*> ptrs(const std::vector<ParamVector>& pts) {
  std::vector<const ParamVector*> out;
  for (const auto& p : pts) out.push_back(&p);
  return out;
}

void BM_GramSerial(benchmark::State& state) {
  const auto pts = points(150, static_cast<int>(state.range(0)));
  const auto p = ptrs(pts);
  for (auto _ : state) benchmark::DoNotOptimize(serial::gram(KernelSpec{}, p));
}

void BM_GramOpenMP(benchmark::State& state) {
  const auto pts = points(150, static_cast<int>(state.range(0)));
  const auto p = ptrs(pts);
  for (auto _ : state) benchmark::DoNotOptimize(gram(KernelSpec{}, std::span<const ParamVector* const>(p)));
}

struct StepFixture {
  Objective objective;
  OptimizerSpec opt;
  std::vector<ProxyPoint> starts;
  std::vector<double> scales;

  explicit StepFixture(int d)
      : objective([d] {
          ObjectiveSpec s;
          s.name = ObjectiveName::Ackley;
          s.dim = d;
          return s;
        }()) {
    for (const auto& p : points(5, d)) starts.push_back({p, init_state(opt, d)});
    scales.assign(starts.size(), 1.0);
  }
};

void BM_ParallelStepSerial(benchmark::State& state) {
  const StepFixture f(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(serial::parallel_step(f.objective, Batch{}, f.opt, f.starts, f.scales, false));
}

void BM_ParallelStepOpenMP(benchmark::State& state) {
  const StepFixture f(static_cast<int>(state.range(0)));
  const ParallelOptions options{static_cast<int>(state.range(1)), false};
  for (auto _ : state)
    benchmark::DoNotOptimize(parallel_step(f.objective, Batch{}, f.opt, f.starts, f.scales, options));
}

}  // namespace

BENCHMARK(BM_GramSerial)->Arg(100)->Arg(1000)->Arg(10000);
BENCHMARK(BM_GramOpenMP)->Arg(100)->Arg(1000)->Arg(10000);
BENCHMARK(BM_ParallelStepSerial)->Arg(1000)->Arg(100000);
BENCHMARK(BM_ParallelStepOpenMP)->Args({1000, 1})->Args({1000, 5})->Args({100000, 1})->Args({100000, 5});

BENCHMARK_MAIN();
