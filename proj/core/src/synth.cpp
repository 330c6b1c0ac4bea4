#include "lowlight/synth.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <fstream>

#include <nlohmann/json.hpp>

#include "lowlight/error.hpp"
#include "lowlight/parallel.hpp"
#include "lowlight/rng.hpp"

namespace lowlight::synth {

namespace fs = std::filesystem;

DegradationConfig DegradationConfig::identity() {
  DegradationConfig cfg;
  cfg.exposure = 1.0;
  cfg.photons_full_scale = kNoShotNoise;
  cfg.read_sigma = 0.0;
  cfg.wb_gains = {1.0, 1.0, 1.0};
  cfg.demosaic = false;
  return cfg;
}

void validate(const DegradationConfig& cfg) {
  if (!(cfg.exposure > 0.0 && cfg.exposure <= 1.0)) {
    throw ArgumentError("exposure must be in (0, 1], got " + std::to_string(cfg.exposure));
  }
  if (!(cfg.gamma > 0.0) || !std::isfinite(cfg.gamma)) {
    throw ArgumentError("gamma must be > 0, got " + std::to_string(cfg.gamma));
  }
  if (!(cfg.photons_full_scale > 0.0)) {
    throw ArgumentError("photons_full_scale must be > 0");
  }
  if (!(cfg.read_sigma >= 0.0) || !std::isfinite(cfg.read_sigma)) {
    throw ArgumentError("read_sigma must be >= 0");
  }
  for (double g : cfg.wb_gains) {
    if (!(g > 0.0) || !std::isfinite(g)) throw ArgumentError("wb_gains must be > 0");
  }
}

double srgb_to_linear(std::uint8_t v, double gamma) {
  return std::pow(static_cast<double>(v) / 255.0, gamma);
}

std::uint8_t linear_to_srgb8(double linear, double gamma) {
  const double clamped = std::clamp(linear, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::round(255.0 * std::pow(clamped, 1.0 / gamma)));
}

namespace {

// Channel carried by the RGGB mosaic at (x, y).
int bayer_channel(std::size_t x, std::size_t y) {
  if (y % 2 == 0) return x % 2 == 0 ? 0 : 1;
  return x % 2 == 0 ? 1 : 2;
}

// planes: 3 planes of w*h values; returns demosaiced planes.
std::vector<double> mosaic_demosaic(const std::vector<double>& planes, std::size_t w,
                                    std::size_t h) {
  const std::size_t hw = w * h;
  std::vector<double> raw(hw);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      raw[y * w + x] = planes[bayer_channel(x, y) * hw + y * w + x];

  using Offsets = std::array<std::pair<int, int>, 4>;
  auto avg = [&](std::size_t x, std::size_t y, const Offsets& offs, std::size_t count) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < count; ++k) {
      const auto [dx, dy] = offs[k];
      const long xx = static_cast<long>(x) + dx;
      const long yy = static_cast<long>(y) + dy;
      if (xx < 0 || yy < 0 || xx >= static_cast<long>(w) || yy >= static_cast<long>(h)) continue;
      sum += raw[static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)];
      ++n;
    }
    // a 1x1 image has no neighbours of the missing colour
    return n == 0 ? raw[y * w + x] : sum / n;
  };
  static constexpr Offsets kCross{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
  static constexpr Offsets kDiag{{{-1, -1}, {1, -1}, {-1, 1}, {1, 1}}};
  static constexpr Offsets kHoriz{{{-1, 0}, {1, 0}, {0, 0}, {0, 0}}};
  static constexpr Offsets kVert{{{0, -1}, {0, 1}, {0, 0}, {0, 0}}};

  std::vector<double> out(3 * hw);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * w + x;
      const int site = bayer_channel(x, y);
      double r, g, b;
      if (site == 0) {
        r = raw[i];
        g = avg(x, y, kCross, 4);
        b = avg(x, y, kDiag, 4);
      } else if (site == 2) {
        b = raw[i];
        g = avg(x, y, kCross, 4);
        r = avg(x, y, kDiag, 4);
      } else {
        g = raw[i];
        if (y % 2 == 0) {  // green on a red row
          r = avg(x, y, kHoriz, 2);
          b = avg(x, y, kVert, 2);
        } else {
          b = avg(x, y, kHoriz, 2);
          r = avg(x, y, kVert, 2);
        }
      }
      out[i] = r;
      out[hw + i] = g;
      out[2 * hw + i] = b;
    }
  }
  return out;
}

std::vector<double> to_scaled_linear(const Image8& img, const DegradationConfig& cfg) {
  const std::size_t w = img.width();
  const std::size_t h = img.height();
  const std::size_t hw = w * h;
  std::vector<double> planes(3 * hw);
  for (std::size_t c = 0; c < 3; ++c) {
    const double gain = cfg.exposure * cfg.wb_gains[c];
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        planes[c * hw + y * w + x] = srgb_to_linear(img.at(x, y, c), cfg.gamma) * gain;
  }
  return planes;
}

void check_nonempty(const Image8& img) {
  if (img.width() == 0 || img.height() == 0) throw ArgumentError("zero-sized image");
}

}  // namespace

Image8 degrade(const Image8& img, const DegradationConfig& cfg) {
  check_nonempty(img);
  validate(cfg);
  const std::size_t w = img.width();
  const std::size_t h = img.height();
  const std::size_t hw = w * h;
  std::vector<double> planes = to_scaled_linear(img, cfg);

  Rng rng(cfg.seed);
  if (std::isfinite(cfg.photons_full_scale)) {
    for (double& v : planes) v = rng.poisson(v * cfg.photons_full_scale) / cfg.photons_full_scale;
  }
  if (cfg.read_sigma > 0.0) {
    for (double& v : planes) v += cfg.read_sigma * rng.normal();
  }
  if (cfg.demosaic) planes = mosaic_demosaic(planes, w, h);

  Image8 out(w, h);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        out.at(x, y, c) = linear_to_srgb8(planes[c * hw + y * w + x], cfg.gamma);
  return out;
}

std::vector<double> expected_linear(const Image8& clean, const DegradationConfig& cfg) {
  check_nonempty(clean);
  validate(cfg);
  auto planes = to_scaled_linear(clean, cfg);
  if (cfg.demosaic) planes = mosaic_demosaic(planes, clean.width(), clean.height());
  return planes;
}

NoiseCorrelation noise_autocorrelation(const Image8& clean, const Image8& degraded,
                                       const DegradationConfig& cfg) {
  if (clean.width() != degraded.width() || clean.height() != degraded.height()) {
    throw ArgumentError("noise_autocorrelation: image dimensions differ");
  }
  const std::size_t w = clean.width();
  const std::size_t h = clean.height();
  const std::size_t hw = w * h;
  const auto expected = expected_linear(clean, cfg);

  auto pearson = [](const std::vector<std::pair<double, double>>& pairs, bool& ok) {
    if (pairs.empty()) {
      ok = false;
      return 0.0;
    }
    double ma = 0.0, mb = 0.0;
    for (auto [a, b] : pairs) {
      ma += a;
      mb += b;
    }
    ma /= static_cast<double>(pairs.size());
    mb /= static_cast<double>(pairs.size());
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (auto [a, b] : pairs) {
      sab += (a - ma) * (b - mb);
      saa += (a - ma) * (a - ma);
      sbb += (b - mb) * (b - mb);
    }
    if (saa <= 1e-300 || sbb <= 1e-300) {
      ok = false;
      return 0.0;
    }
    return sab / std::sqrt(saa * sbb);
  };

  NoiseCorrelation result;
  std::vector<double> noise(hw);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        noise[y * w + x] =
            srgb_to_linear(degraded.at(x, y, c), cfg.gamma) - expected[c * hw + y * w + x];

    std::vector<std::pair<double, double>> horiz, vert;
    horiz.reserve(hw);
    vert.reserve(hw);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        if (x + 1 < w) horiz.emplace_back(noise[y * w + x], noise[y * w + x + 1]);
        if (y + 1 < h) vert.emplace_back(noise[y * w + x], noise[(y + 1) * w + x]);
      }
    }
    bool ok_h = true, ok_v = true;
    auto& ch = result.channels[c];
    ch.horizontal = pearson(horiz, ok_h);
    ch.vertical = pearson(vert, ok_v);
    ch.defined = ok_h && ok_v;
    if (!ch.defined) ch.horizontal = ch.vertical = 0.0;
  }
  return result;
}

JitterRanges JitterRanges::defaults() {
  JitterRanges j;
  j.exposure = Range{0.05, 0.3};
  j.photons_full_scale = Range{500.0, 5000.0};
  j.read_sigma = Range{0.001, 0.01};
  return j;
}

DegradationConfig sample_config(const DegradationConfig& base, const JitterRanges& jitter,
                                std::uint64_t index) {
  auto check = [](const std::optional<Range>& r, const char* name, bool positive) {
    if (!r) return;
    if (!(r->lo <= r->hi) || (positive && !(r->lo > 0.0))) {
      throw ArgumentError(std::string("invalid ") + name + " jitter range [" +
                          std::to_string(r->lo) + ", " + std::to_string(r->hi) + "]");
    }
  };
  check(jitter.exposure, "exposure", true);
  check(jitter.photons_full_scale, "photons_full_scale", true);
  check(jitter.read_sigma, "read_sigma", false);
  DegradationConfig cfg = base;
  cfg.seed = mix_seed(base.seed, index);
  Rng rng(mix_seed(cfg.seed, 0x6a177e5ULL));
  if (jitter.exposure) cfg.exposure = rng.log_uniform(jitter.exposure->lo, jitter.exposure->hi);
  if (jitter.photons_full_scale) {
    cfg.photons_full_scale =
        rng.log_uniform(jitter.photons_full_scale->lo, jitter.photons_full_scale->hi);
  }
  if (jitter.read_sigma) cfg.read_sigma = rng.uniform(jitter.read_sigma->lo, jitter.read_sigma->hi);
  return cfg;
}

std::string manifest_line(const ManifestRecord& rec) {
  nlohmann::ordered_json j;
  j["file"] = rec.file;
  j["exposure"] = rec.cfg.exposure;
  if (std::isfinite(rec.cfg.photons_full_scale)) {
    j["photons_full_scale"] = rec.cfg.photons_full_scale;
  } else {
    j["photons_full_scale"] = nullptr;
  }
  j["read_sigma"] = rec.cfg.read_sigma;
  j["wb_gains"] = rec.cfg.wb_gains;
  j["seed"] = rec.cfg.seed;
  if (rec.error) j["error"] = *rec.error;
  return j.dump();
}

std::vector<ManifestRecord> degrade_dataset(const fs::path& input_dir, const fs::path& output_dir,
                                            const DegradationConfig& base,
                                            const JitterRanges& jitter) {
  validate(base);
  validate(sample_config(base, jitter, 0));
  if (!fs::is_directory(input_dir)) {
    throw ArgumentError("input directory does not exist: " + input_dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(input_dir)) {
    if (entry.is_regular_file() && is_image_path(entry.path())) files.push_back(entry.path());
  }
  if (files.empty()) throw ArgumentError("no .png/.ppm images in " + input_dir.string());
  std::sort(files.begin(), files.end());
  fs::create_directories(output_dir);

  std::vector<ManifestRecord> records(files.size());
  parallel_for(files.size(), [&](std::size_t i) {
    auto& rec = records[i];
    rec.file = files[i].filename().string();
    rec.cfg = sample_config(base, jitter, i);
    try {
      const Image8 img = read_image(files[i]);
      write_image(output_dir / files[i].filename(), degrade(img, rec.cfg));
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
  });

  std::ofstream manifest(output_dir / "manifest.jsonl");
  if (!manifest) throw ArgumentError("cannot write manifest in " + output_dir.string());
  for (const auto& rec : records) {
    if (rec.error) std::cerr << "warning: skipped " << rec.file << ": " << *rec.error << "\n";
    manifest << manifest_line(rec) << "\n";
  }
  return records;
}

Image8 make_scene(std::size_t width, std::size_t height, std::uint64_t seed) {
  if (width == 0 || height == 0) throw ArgumentError("zero-sized scene");
  Rng rng(seed);
  std::array<double, 3> top{}, bottom{};
  for (auto& v : top) v = rng.uniform(0.3, 0.9);
  for (auto& v : bottom) v = rng.uniform(0.1, 0.7);
  std::vector<double> px(width * height * 3);
  for (std::size_t y = 0; y < height; ++y) {
    const double t = height > 1 ? static_cast<double>(y) / static_cast<double>(height - 1) : 0.0;
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t c = 0; c < 3; ++c) px[(y * width + x) * 3 + c] = (1 - t) * top[c] + t * bottom[c];
  }
  const int shapes = 3 + static_cast<int>(rng.below(5));
  for (int s = 0; s < shapes; ++s) {
    std::array<double, 3> color{};
    for (auto& v : color) v = rng.uniform(0.0, 1.0);
    const double cx = rng.uniform(0.0, static_cast<double>(width));
    const double cy = rng.uniform(0.0, static_cast<double>(height));
    const double rx = rng.uniform(0.08, 0.3) * static_cast<double>(width);
    const double ry = rng.uniform(0.08, 0.3) * static_cast<double>(height);
    const bool disc = rng.uniform() < 0.5;
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double dx = (static_cast<double>(x) + 0.5 - cx) / rx;
        const double dy = (static_cast<double>(y) + 0.5 - cy) / ry;
        const bool inside = disc ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (!inside) continue;
        for (std::size_t c = 0; c < 3; ++c) px[(y * width + x) * 3 + c] = color[c];
      }
    }
  }
  Image8 img(width, height);
  for (std::size_t i = 0; i < px.size(); ++i) {
    img.data()[i] = static_cast<std::uint8_t>(std::round(255.0 * std::clamp(px[i], 0.0, 1.0)));
  }
  return img;
}

}  // namespace lowlight::synth
