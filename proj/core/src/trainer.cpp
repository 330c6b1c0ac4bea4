#include "lowlight/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>

#include "lowlight/error.hpp"
#include "lowlight/parallel.hpp"
#include "lowlight/rng.hpp"

namespace lowlight::train {

namespace fs = std::filesystem;
using backbone::FeaturePyramid;
using backbone::kStages;
using backbone::ToyBackbone;

void TrainConfig::validate() const {
  if (steps < 1) throw ArgumentError("steps must be >= 1");
  if (batch_size < 1) throw ArgumentError("batch size must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ArgumentError("learning rate must be >= 0");
  if (!(lr_decay > 0.0)) throw ArgumentError("lr decay factor must be > 0");
}

double learning_rate_at(const TrainConfig& cfg, std::size_t step) {
  std::size_t decays = 0;
  if (cfg.decay_interval > 0) {
    decays = step / cfg.decay_interval;
  } else {
    // Milestones never land on step 0, so very short runs start at the full rate.
    const auto first = std::max<std::size_t>(1, static_cast<std::size_t>(0.6 * static_cast<double>(cfg.steps)));
    const auto second = std::max<std::size_t>(1, static_cast<std::size_t>(0.9 * static_cast<double>(cfg.steps)));
    decays = (step >= first ? 1 : 0) + (step >= second ? 1 : 0);
  }
  return cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(decays));
}

namespace {

struct SampleResult {
  double loss = 0.0;
  std::array<nl::NLGradients, kStages> grads;
};

SampleResult sample_gradient(const ToyBackbone& bb, const Tensor& degraded,
                             const FeaturePyramid& clean) {
  const auto trace = backbone::extract_traced(degraded, bb, true);
  auto loss = backbone::feature_consistency_loss(trace.features, clean);
  return {loss.loss, backbone::backward(trace, loss.grad, bb)};
}

}  // namespace

double dataset_loss(const ToyBackbone& bb, const std::vector<ImagePair>& data) {
  if (data.empty()) throw ArgumentError("empty dataset");
  std::vector<double> losses(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    const auto noisy = backbone::extract(data[i].degraded, bb, true);
    const auto clean = backbone::extract(data[i].clean, bb, false);
    losses[i] = backbone::feature_consistency_loss(noisy, clean).loss;
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(data.size());
}

TrainResult train_nl_blocks(ToyBackbone& bb, const std::vector<ImagePair>& data,
                            const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw ArgumentError("training needs at least one image pair");

  // Stage convolutions are frozen, so clean targets never change.
  std::vector<Tensor> degraded(data.size());
  std::vector<FeaturePyramid> clean(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    degraded[i] = backbone::image_to_tensor(data[i].degraded);
    clean[i] = backbone::extract(data[i].clean, bb, false);
  });

  TrainResult result;
  result.initial_w = bb.stage_weights();
  result.initial_loss = dataset_loss(bb, data);
  result.curve.reserve(cfg.steps);

  Rng rng(mix_seed(cfg.seed, 0x7a11));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  auto reshuffle = [&] {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    cursor = 0;
  };

  const std::size_t batch = std::min(cfg.batch_size, data.size());
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<std::size_t> members;
    while (members.size() < batch) {
      if (cursor == order.size()) reshuffle();
      const std::size_t candidate = order[cursor++];
      if (std::find(members.begin(), members.end(), candidate) == members.end()) {
        members.push_back(candidate);
      }
    }
    std::sort(members.begin(), members.end());

    std::vector<SampleResult> samples(members.size());
    parallel_for(members.size(), [&](std::size_t k) {
      samples[k] = sample_gradient(bb, degraded[members[k]], clean[members[k]]);
    });

    const double inv_batch = 1.0 / static_cast<double>(members.size());
    double loss = 0.0;
    std::array<nl::NLGradients, kStages> total;
    for (std::size_t s = 0; s < kStages; ++s) total[s] = nl::NLGradients::zeros_like(bb.nl_blocks[s]);
    for (const auto& sample : samples) {
      loss += sample.loss;
      for (std::size_t s = 0; s < kStages; ++s) total[s].accumulate(sample.grads[s]);
    }
    loss *= inv_batch;
    if (!std::isfinite(loss)) {
      throw NumericError("non-finite training loss at step " + std::to_string(step + 1));
    }

    const double lr = learning_rate_at(cfg, step);
    result.curve.push_back({step + 1, loss, bb.stage_weights(), lr});

    for (std::size_t s = 0; s < kStages; ++s) {
      auto params = nl::parameter_arrays(bb.nl_blocks[s]);
      auto grads = nl::gradient_arrays(total[s]);
      for (std::size_t a = 0; a < params.size(); ++a) {
        if (params[a].first == "w" && !cfg.train_w) continue;
        auto values = params[a].second;
        auto g = grads[a].second;
        for (std::size_t i = 0; i < values.size(); ++i) values[i] -= lr * g[i] * inv_batch;
      }
      bb.nl_blocks[s].clamp_w();
    }
  }

  result.final_w = bb.stage_weights();
  result.final_loss = dataset_loss(bb, data);
  return result;
}

void write_curve_csv(std::ostream& out, const TrainResult& result) {
  out << "step,loss,w1,w2,w3,w4,lr\n";
  out << std::setprecision(17);
  for (const auto& r : result.curve) {
    out << r.step << "," << r.loss;
    for (double w : r.w) out << "," << w;
    out << "," << r.lr << "\n";
  }
}

std::vector<AblationRow> ablate_forms(const std::vector<ImagePair>& data,
                                      const backbone::BackboneSpec& spec, const TrainConfig& cfg) {
  std::vector<AblationRow> rows;
  for (nl::NLForm form : nl::kAllForms) {
    auto form_spec = spec;
    form_spec.form = form;
    ToyBackbone bb = ToyBackbone::create(form_spec);
    AblationRow row{form, train_nl_blocks(bb, data, cfg), {}};
    row.learned_w = bb.stage_weights();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ImagePair> load_pairs(const fs::path& dir) {
  const fs::path clean_dir = dir / "clean";
  const fs::path low_dir = dir / "low";
  if (!fs::is_directory(clean_dir) || !fs::is_directory(low_dir)) {
    throw ArgumentError("pairs directory must contain clean/ and low/: " + dir.string());
  }
  std::vector<fs::path> names;
  for (const auto& e : fs::directory_iterator(clean_dir)) {
    if (e.is_regular_file() && is_image_path(e.path()) && fs::exists(low_dir / e.path().filename())) {
      names.push_back(e.path().filename());
    }
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw ArgumentError("no matching clean/low image pairs in " + dir.string());
  std::vector<ImagePair> pairs;
  for (const auto& n : names) {
    ImagePair p{read_image(clean_dir / n), read_image(low_dir / n)};
    if (p.clean.width() != p.degraded.width() || p.clean.height() != p.degraded.height()) {
      throw ValidationError("pair " + n.string() + " has mismatched dimensions");
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace lowlight::train
