#include <benchmark/benchmark.h>

#include "lowlight/evaluate.hpp"
#include "lowlight/rng.hpp"

using namespace lowlight;
using namespace lowlight::eval;

namespace {

RLEMask box(std::size_t h, std::size_t w, std::size_t x0, std::size_t y0, std::size_t bw, std::size_t bh) {
  BinaryMask m(h, w);
  for (std::size_t y = y0; y < std::min(h, y0 + bh); ++y)
    for (std::size_t x = x0; x < std::min(w, x0 + bw); ++x) m.set(x, y);
  return RLEMask::encode(m);
}

struct Dataset {
  GroundTruth gt;
  std::vector<InstancePrediction> preds;
};

// Boxes on 160x120 images, each object with a jittered true positive plus clutter.
Dataset make_dataset(std::size_t images, std::size_t objects) {
  constexpr std::size_t kH = 120, kW = 160;
  Rng rng(7);
  Dataset d;
  d.gt.categories = {{1, "a"}, {2, "b"}, {3, "c"}};
  std::int64_t id = 1;
  for (std::size_t i = 0; i < images; ++i) {
    const auto img = static_cast<std::int64_t>(i + 1);
    d.gt.images.push_back({img, kW, kH, ""});
    for (std::size_t k = 0; k < objects; ++k) {
      const std::size_t bw = 4 + rng.below(100), bh = 4 + rng.below(80);
      const std::size_t x0 = rng.below(kW - 4), y0 = rng.below(kH - 4);
      const auto cat = static_cast<std::int64_t>(1 + rng.below(3));
      const auto mask = box(kH, kW, x0, y0, bw, bh);
      d.gt.annotations.push_back({id++, img, cat, mask, mask.area(), rng.uniform() < 0.05});
      d.preds.push_back({img, cat, box(kH, kW, x0 + rng.below(4), y0 + rng.below(4), bw, bh), rng.uniform()});
      d.preds.push_back({img, cat, box(kH, kW, rng.below(kW - 4), rng.below(kH - 4), bw, bh), rng.uniform()});
    }
  }
  return d;
}

void BM_Evaluate(benchmark::State& state) {
  const auto d = make_dataset(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(d.gt, d.preds).overall.ap);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.preds.size()));
}

void BM_MaskIou(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto a = box(side, side, side / 8, side / 8, side / 2, side / 2);
  const auto b = box(side, side, side / 4, side / 4, side / 2, side / 2);
  for (auto _ : state) benchmark::DoNotOptimize(mask_iou(a, b));
}

}  // namespace

BENCHMARK(BM_Evaluate)->Args({10, 5})->Args({50, 10})->Args({200, 10});
BENCHMARK(BM_MaskIou)->Arg(64)->Arg(512);
