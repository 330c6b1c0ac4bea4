#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lowlight/backbone.hpp"
#include "lowlight/image.hpp"

namespace lowlight::cli {

// Exit codes: 0 success, 1 bad arguments or invalid input, 2 numeric/internal failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

// Appends "--key value" for every key of a flat JSON config object whose flag
// is not already present in args. true becomes a bare flag, false is dropped,
// arrays are comma-joined. Throws ValidationError for nested objects.
std::vector<std::string> merge_config(const std::vector<std::string>& args,
                                      const nlohmann::json& config);

// Per-position L2 norm over channels, (H, W) row-major.
std::vector<double> channel_norm_map(const Tensor& t);

// [input | pre-NL | post-NL] strip for one stage. Both feature maps share one
// min-max normalization and are nearest-neighbour upsampled to the input size.
Image8 denoise_strip(const Image8& input, const Tensor& pre, const Tensor& post);

}  // namespace lowlight::cli
