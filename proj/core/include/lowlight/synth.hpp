#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lowlight/image.hpp"

namespace lowlight::synth {

inline constexpr double kNoShotNoise = std::numeric_limits<double>::infinity();

struct DegradationConfig {
  double exposure = 0.15;               // linear-domain multiplier, (0, 1]
  double gamma = 2.2;                   // display gamma exponent
  double photons_full_scale = 1000.0;   // photons at linear 1.0; kNoShotNoise disables shot noise
  double read_sigma = 0.005;            // Gaussian read noise, linear units
  std::array<double, 3> wb_gains{1.0, 1.0, 1.0};
  bool demosaic = true;                 // RGGB mosaic + bilinear demosaic
  std::uint64_t seed = 0;

  // Exposure 1, no noise, unit gains, no demosaic.
  static DegradationConfig identity();
};

// Throws ArgumentError naming the offending field.
void validate(const DegradationConfig& cfg);

// Scalar transfer functions shared by the pipeline and diagnostics.
double srgb_to_linear(std::uint8_t v, double gamma);
std::uint8_t linear_to_srgb8(double linear, double gamma);

// Six stages, in order: inverse gamma; exposure and white balance; Poisson shot
// noise; Gaussian read noise; optional RGGB mosaic + bilinear demosaic; clamp,
// gamma and 8-bit quantization. Deterministic for a given cfg.seed.
Image8 degrade(const Image8& img, const DegradationConfig& cfg);

// Noise-free linear signal that degrade() would produce before clamping.
// Planar layout: channel-major, then row-major.
std::vector<double> expected_linear(const Image8& clean, const DegradationConfig& cfg);

struct ChannelCorrelation {
  double horizontal = 0.0;
  double vertical = 0.0;
  bool defined = false;  // false when the noise field has zero variance
};

struct NoiseCorrelation {
  std::array<ChannelCorrelation, 3> channels;
  bool zero_variance() const {
    return !channels[0].defined && !channels[1].defined && !channels[2].defined;
  }
};

// Lag-1 Pearson correlation of linear(degraded) - expected_linear(clean, cfg).
NoiseCorrelation noise_autocorrelation(const Image8& clean, const Image8& degraded,
                                       const DegradationConfig& cfg);

struct Range {
  double lo;
  double hi;
};

// Per-image parameter jitter. Unset fields keep the base config value.
struct JitterRanges {
  std::optional<Range> exposure;            // log-uniform
  std::optional<Range> photons_full_scale;  // log-uniform
  std::optional<Range> read_sigma;          // uniform

  static JitterRanges none() { return {}; }
  static JitterRanges defaults();
};

// Per-image config for the image at `index`: seed derived from base.seed and
// jittered parameters drawn from an independent stream.
DegradationConfig sample_config(const DegradationConfig& base, const JitterRanges& jitter,
                                std::uint64_t index);

struct ManifestRecord {
  std::string file;
  DegradationConfig cfg;
  std::optional<std::string> error;  // set when the file could not be processed
};

// Degrades every .png/.ppm in input_dir (sorted by name) into output_dir under
// the same name and writes output_dir/manifest.jsonl. Unreadable files are
// reported on stderr and recorded in the manifest.
std::vector<ManifestRecord> degrade_dataset(const std::filesystem::path& input_dir,
                                            const std::filesystem::path& output_dir,
                                            const DegradationConfig& base,
                                            const JitterRanges& jitter);

std::string manifest_line(const ManifestRecord& rec);

// Procedural "normal-light" scene: smooth background with colored shapes.
Image8 make_scene(std::size_t width, std::size_t height, std::uint64_t seed);

}  // namespace lowlight::synth
