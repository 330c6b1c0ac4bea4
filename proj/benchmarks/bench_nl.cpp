#include <benchmark/benchmark.h>

#include "lowlight/backbone.hpp"
#include "lowlight/nl_block.hpp"
#include "lowlight/synth.hpp"

using namespace lowlight;

namespace {

Tensor random_input(Rng& rng, std::size_t c, std::size_t side) {
  Tensor x = Tensor::chw(c, side, side);
  for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
  return x;
}

// Args: form index, channels, spatial side.
void BM_BlockForward(benchmark::State& state) {
  const auto form = nl::kAllForms[state.range(0)];
  const auto c = static_cast<std::size_t>(state.range(1)), side = static_cast<std::size_t>(state.range(2));
  Rng rng(1);
  const auto p = nl::NLBlockParams::init(form, c, 2, rng, 0.5);
  const auto x = random_input(rng, c, side);
  for (auto _ : state) benchmark::DoNotOptimize(nl::block_forward(x, p).z.data().data());
  state.SetLabel(std::string(nl::form_id(form)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(side * side));
}

void BM_BlockBackward(benchmark::State& state) {
  const auto form = nl::kAllForms[state.range(0)];
  const auto c = static_cast<std::size_t>(state.range(1)), side = static_cast<std::size_t>(state.range(2));
  Rng rng(2);
  const auto p = nl::NLBlockParams::init(form, c, 2, rng, 0.5);
  const auto x = random_input(rng, c, side);
  const auto fwd = nl::block_forward(x, p);
  const auto dz = random_input(rng, c, side);
  for (auto _ : state) benchmark::DoNotOptimize(nl::block_backward(fwd.cache, dz, p).d_input.data().data());
  state.SetLabel(std::string(nl::form_id(form)));
}

void BM_BackboneTrainStep(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto bb = backbone::ToyBackbone::create({});
  const auto clean = synth::make_scene(side, side, 3);
  const auto noisy = backbone::image_to_tensor(synth::degrade(clean, {}));
  const auto target = backbone::extract(clean, bb, false);
  for (auto _ : state) {
    const auto trace = backbone::extract_traced(noisy, bb, true);
    const auto loss = backbone::feature_consistency_loss(trace.features, target);
    benchmark::DoNotOptimize(backbone::backward(trace, loss.grad, bb));
  }
}

}  // namespace

BENCHMARK(BM_BlockForward)->ArgsProduct({{0, 1, 2}, {8, 32}, {8, 16}});
BENCHMARK(BM_BlockBackward)->ArgsProduct({{0, 1, 2}, {8, 32}, {8, 16}});
BENCHMARK(BM_BackboneTrainStep)->Arg(32)->Arg(64);
