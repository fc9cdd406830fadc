#include <benchmark/benchmark.h>

#include "ncsmpc/batch.hpp"

using namespace ncsmpc;

namespace {

const Scenario& cartpole() {
  static const Scenario s = [] {
    ScenarioConfig cfg = load_config(NCSMPC_CONFIG_DIR "/cartpole_feasible.yaml");
    cfg.length = 200;
    return Scenario(cfg);
  }();
  return s;
}

void BM_BatchParallel(benchmark::State& state) {
  const auto seeds = seed_range(1, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_batch(cartpole(), seeds));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_BatchSerial(benchmark::State& state) {
  const auto seeds = seed_range(1, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_batch_serial(cartpole(), seeds));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_BatchParallel)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchSerial)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
