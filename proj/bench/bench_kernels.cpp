// Parallel kernels against their serial references.

#include "weakkam/weak_kam.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace weakkam;

namespace {

Kernel random_kernel(int n) {
  Kernel k(1, n, 1.0, 0.01);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (double& x : k.values()) x = u(rng);
  return k;
}

GridField random_field(int n) {
  GridField f(1, n);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& x : f.values) x = u(rng);
  return f;
}

void BM_KernelAssembly(benchmark::State& state) {
  const Model m = make_pendulum();
  KernelSpec spec;
  spec.points_per_axis = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(compute_kernel(m, OneForm::constant(0.5), spec));
}

void BM_KernelAssemblySerial(benchmark::State& state) {
  const Model m = make_pendulum();
  KernelSpec spec;
  spec.points_per_axis = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(compute_kernel_serial(m, OneForm::constant(0.5), spec));
}

void BM_LaxOleinikStep(benchmark::State& state) {
  const Kernel k = random_kernel(static_cast<int>(state.range(0)));
  const GridField u = random_field(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(lax_oleinik_step(k, u));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(k.size() * k.size()));
}

void BM_LaxOleinikStepSerial(benchmark::State& state) {
  const Kernel k = random_kernel(static_cast<int>(state.range(0)));
  const GridField u = random_field(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(lax_oleinik_step_serial(k, u));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(k.size() * k.size()));
}

}  // namespace

BENCHMARK(BM_KernelAssembly)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KernelAssemblySerial)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LaxOleinikStep)->Arg(256)->Arg(1024)->Arg(4096)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LaxOleinikStepSerial)->Arg(256)->Arg(1024)->Arg(4096)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
