#include <benchmark/benchmark.h>

#include "lowlight/synth.hpp"

using namespace lowlight;

static void BM_Degrade(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto img = synth::make_scene(side, side, 1);
  synth::DegradationConfig cfg;
  cfg.demosaic = state.range(1) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(synth::degrade(img, cfg).data().data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(side * side));
}

BENCHMARK(BM_Degrade)->ArgsProduct({{64, 256}, {0, 1}});
