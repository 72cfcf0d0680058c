#include <benchmark/benchmark.h>

#include "paygo/tolling.hpp"

using namespace paygo;

// One full simulated drive-through, provisioning excluded.
static void BM_CalibratedSession(benchmark::State& state) {
  const tolling::SessionConfig cfg;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    state.PauseTiming();
    auto world = tolling::provision({}, ++seed);
    state.ResumeTiming();
    benchmark::DoNotOptimize(tolling::run_toll_session(world, cfg, seed));
  }
}
BENCHMARK(BM_CalibratedSession)->Unit(benchmark::kMillisecond);

static void BM_Provision(benchmark::State& state) {
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(tolling::provision({}, ++seed));
}
BENCHMARK(BM_Provision)->Unit(benchmark::kMillisecond);
