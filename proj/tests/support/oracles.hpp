#pragma once

// Deliberately naive re-derivations used as test oracles. None of these call
// into the vectorized code paths they check.

#include <cstdint>
#include <vector>

#include "lowlight/backbone.hpp"
#include "lowlight/image.hpp"
#include "lowlight/nl_block.hpp"
#include "lowlight/rle.hpp"
#include "lowlight/synth.hpp"
#include "lowlight/tensor.hpp"

namespace oracle {

using lowlight::Matrix;
using lowlight::Tensor;

Matrix matmul(const Matrix& a, const Matrix& b);

// out[o, h, w] = Σ_c weight[o, c] x[c, h, w] + bias[o], one position at a time.
Tensor conv1x1(const Tensor& x, const Matrix& weight, const std::vector<double>& bias);

struct NaiveNL {
  Tensor y;
  Matrix attention;
};

// Per-position double loop over i, j of the non-local operation.
NaiveNL nl_operation(const Tensor& x, const lowlight::nl::NLBlockParams& p);
Tensor block_forward(const Tensor& x, const lowlight::nl::NLBlockParams& p);

// 3x3 stride-2 pad-1 convolution + ReLU evaluated by direct summation.
Tensor conv_stage(const Tensor& x, const lowlight::backbone::ConvStage& stage);

// Noise-free degradation evaluated one scalar at a time, including the
// bilinear demosaic written as "mean of same-colour sites in the 3x3 window".
lowlight::Image8 degrade_noise_free(const lowlight::Image8& img,
                                    const lowlight::synth::DegradationConfig& cfg);
std::uint8_t transfer(std::uint8_t v, double exposure, double gain, double gamma);

// Ray-casting point-in-polygon test at every pixel center.
lowlight::eval::BinaryMask rasterize(const std::vector<std::vector<double>>& polygons,
                                     std::size_t height, std::size_t width);

std::size_t popcount(const lowlight::eval::BinaryMask& m);
double pixel_iou(const lowlight::eval::BinaryMask& a, const lowlight::eval::BinaryMask& b);

}  // namespace oracle
