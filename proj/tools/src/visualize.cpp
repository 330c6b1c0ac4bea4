#include <algorithm>
#include <cmath>

#include "lowlight/error.hpp"
#include "lowlight_cli/cli.hpp"

namespace lowlight::cli {

std::vector<double> channel_norm_map(const Tensor& t) {
  const std::size_t c = t.channels(), h = t.height(), w = t.width();
  std::vector<double> out(h * w, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) out[y * w + x] += t.at(ch, y, x) * t.at(ch, y, x);
    }
  }
  for (double& v : out) v = std::sqrt(v);
  return out;
}

Image8 denoise_strip(const Image8& input, const Tensor& pre, const Tensor& post) {
  if (!pre.same_shape(post)) {
    throw DimensionError("pre/post feature shapes differ: " + pre.shape_string() + " vs " +
                         post.shape_string());
  }
  const std::size_t w = input.width(), h = input.height();
  const std::size_t fh = pre.height(), fw = pre.width();
  const auto a = channel_norm_map(pre);
  const auto b = channel_norm_map(post);
  double lo = a[0], hi = a[0];
  for (const auto* m : {&a, &b}) {
    for (double v : *m) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const double span = hi > lo ? hi - lo : 1.0;

  Image8 strip(3 * w, h);
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t sy = std::min(fh - 1, y * fh / h);
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t sx = std::min(fw - 1, x * fw / w);
      const auto gray = [&](double v) {
        return static_cast<std::uint8_t>(std::lround(255.0 * (v - lo) / span));
      };
      const std::uint8_t g1 = gray(a[sy * fw + sx]);
      const std::uint8_t g2 = gray(b[sy * fw + sx]);
      for (std::size_t c = 0; c < 3; ++c) {
        strip.at(x, y, c) = input.at(x, y, c);
        strip.at(w + x, y, c) = g1;
        strip.at(2 * w + x, y, c) = g2;
      }
    }
  }
  return strip;
}

}  // namespace lowlight::cli
