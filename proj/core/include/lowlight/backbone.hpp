#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "lowlight/image.hpp"
#include "lowlight/nl_block.hpp"
#include "lowlight/tensor.hpp"

namespace lowlight::backbone {

inline constexpr std::size_t kStages = 4;
inline constexpr std::size_t kMinImageSide = 16;

// 3x3 convolution, stride 2, zero padding 1, followed by ReLU.
struct ConvStage {
  std::size_t c_in = 0;
  std::size_t c_out = 0;
  Matrix weight;  // (c_out, c_in * 9), column index (c * 3 + ky) * 3 + kx
  std::vector<double> bias;

  friend bool operator==(const ConvStage&, const ConvStage&) = default;
};

struct BackboneSpec {
  std::size_t input_channels = 3;
  std::array<std::size_t, kStages> channels{8, 16, 32, 64};
  // Bottleneck reduction of each stage's NL block; the highest-resolution stage uses 4.
  std::array<std::size_t, kStages> reductions{4, 2, 2, 2};
  std::uint64_t seed = 0;
  nl::NLForm form = nl::NLForm::EmbeddedGaussian;
  double w_init = nl::kDefaultMixWeight;
};

using StageWeights = std::array<double, kStages>;

// Four strided stages, each followed by a weighted NL block.
struct ToyBackbone {
  BackboneSpec spec;
  std::array<ConvStage, kStages> stages;
  std::array<nl::NLBlockParams, kStages> nl_blocks;
  bool frozen_stage_params = true;

  // Stage convolutions from a fixed-seed He-uniform draw; NL blocks from an
  // independent stream of the same seed.
  static ToyBackbone create(const BackboneSpec& spec);

  StageWeights stage_weights() const;
  void set_stage_weights(const StageWeights& w);
};

using FeaturePyramid = std::vector<Tensor>;

// (3, H, W) tensor with values v / 255.
Tensor image_to_tensor(const Image8& img);

Tensor conv_forward(const Tensor& x, const ConvStage& stage);  // pre-activation
Tensor conv_backward_input(const Tensor& d_out, const ConvStage& stage, std::size_t in_h,
                           std::size_t in_w);

// Everything a backward pass through the stack needs.
struct ExtractTrace {
  FeaturePyramid pre_nl;    // post-ReLU stage outputs (NL block inputs)
  FeaturePyramid features;  // pyramid handed to consumers
  std::array<nl::BlockCache, kStages> caches;
  bool use_nl = false;
};

ExtractTrace extract_traced(const Tensor& input, const ToyBackbone& bb, bool use_nl);
// Throws ArgumentError for images smaller than 16x16.
FeaturePyramid extract(const Image8& img, const ToyBackbone& bb, bool use_nl);

// Gradients of every NL block given dL/d(features). Stage convolutions are
// treated as constants; gradients flow through them to earlier blocks.
std::array<nl::NLGradients, kStages> backward(const ExtractTrace& trace,
                                              const FeaturePyramid& d_features,
                                              const ToyBackbone& bb);

struct LossResult {
  double loss = 0.0;
  FeaturePyramid grad;  // dL/d(noisy)
};

// Mean squared error over every element of every level.
LossResult feature_consistency_loss(const FeaturePyramid& noisy, const FeaturePyramid& clean);

// Checkpoint layout (little-endian):
//   "NLCKPT\0\0", u32 version, u32 index length L, L bytes JSON index, then the
//   NL parameter containers of stages 1..4 back to back. The index records the
//   backbone spec and each container's offset/length relative to the end of
//   the index.
void save_checkpoint(const std::filesystem::path& path, const ToyBackbone& bb);
ToyBackbone load_checkpoint(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_checkpoint(const ToyBackbone& bb);
ToyBackbone decode_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace lowlight::backbone
