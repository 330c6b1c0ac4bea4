#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "lowlight/backbone.hpp"
#include "lowlight/image.hpp"

namespace lowlight::train {

struct TrainConfig {
  std::size_t steps = 200;
  std::size_t batch_size = 4;
  double lr = 5e-4;
  double lr_decay = 0.1;           // multiplicative factor per decay event
  std::size_t decay_interval = 0;  // steps between decays; 0 = decay at 60% and 90% of steps
  std::uint64_t seed = 0;
  bool train_w = true;             // false pins every w at its current value

  void validate() const;
};

double learning_rate_at(const TrainConfig& cfg, std::size_t step);

struct ImagePair {
  Image8 clean;
  Image8 degraded;
};

struct StepRecord {
  std::size_t step = 0;  // 1-based
  double loss = 0.0;     // batch loss before the update
  backbone::StageWeights w{};  // weights the loss was computed with
  double lr = 0.0;       // rate applied by this step
};

struct TrainResult {
  std::vector<StepRecord> curve;
  double initial_loss = 0.0;  // full-dataset loss before training
  double final_loss = 0.0;    // full-dataset loss after training
  backbone::StageWeights initial_w{};
  backbone::StageWeights final_w{};
};

// Mean feature-consistency loss of every pair under the current NL blocks.
double dataset_loss(const backbone::ToyBackbone& bb, const std::vector<ImagePair>& data);

// SGD on the NL block parameters of `bb` (stage convolutions are never touched)
// minimizing feature_consistency_loss(extract(degraded, NL on), extract(clean, NL off)).
// Batches come from a seeded per-epoch shuffle; per-sample gradients are summed
// in sample-index order. Throws NumericError on a non-finite loss.
TrainResult train_nl_blocks(backbone::ToyBackbone& bb, const std::vector<ImagePair>& data,
                            const TrainConfig& cfg);

// step,loss,w1,w2,w3,w4,lr
void write_curve_csv(std::ostream& out, const TrainResult& result);

struct AblationRow {
  nl::NLForm form;
  TrainResult result;
  backbone::StageWeights learned_w{};
};

// Trains a fresh backbone per NL form with identical spec seed, data and config.
std::vector<AblationRow> ablate_forms(const std::vector<ImagePair>& data,
                                      const backbone::BackboneSpec& spec, const TrainConfig& cfg);

// Loads DIR/clean/<name> and DIR/low/<name> for every image name present in both.
std::vector<ImagePair> load_pairs(const std::filesystem::path& dir);

}  // namespace lowlight::train
