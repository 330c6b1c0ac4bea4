#include "lowlight/rle.hpp"

#include <algorithm>
#include <string>

#include "lowlight/error.hpp"

namespace lowlight::eval {

RLEMask RLEMask::encode(const BinaryMask& mask) {
  if (mask.pixels.size() != mask.height * mask.width) {
    throw ArgumentError("binary mask buffer does not match its dimensions");
  }
  RLEMask rle;
  rle.height = mask.height;
  rle.width = mask.width;
  bool current = false;
  std::uint32_t run = 0;
  for (std::size_t x = 0; x < mask.width; ++x) {
    for (std::size_t y = 0; y < mask.height; ++y) {
      const bool v = mask.at(x, y);
      if (v != current) {
        rle.counts.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

BinaryMask RLEMask::decode() const {
  validate();
  BinaryMask mask(height, width);
  std::size_t pos = 0;
  bool value = false;
  for (auto run : counts) {
    for (std::uint32_t k = 0; k < run; ++k, ++pos) {
      if (value) mask.set(pos / height, pos % height);
    }
    value = !value;
  }
  return mask;
}

std::size_t RLEMask::area() const {
  std::size_t a = 0;
  for (std::size_t i = 1; i < counts.size(); i += 2) a += counts[i];
  return a;
}

void RLEMask::validate() const {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  if (total != height * width) {
    throw ValidationError("RLE counts sum to " + std::to_string(total) + ", expected " +
                          std::to_string(height * width) + " for " + std::to_string(height) + "x" +
                          std::to_string(width));
  }
}

namespace {

void check_same_size(const RLEMask& a, const RLEMask& b) {
  if (a.height != b.height || a.width != b.width) {
    throw ArgumentError("mask sizes differ: " + std::to_string(a.height) + "x" +
                        std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                        std::to_string(b.width));
  }
}

// Walks the two run sequences in lockstep, calling fn(length, bit_a, bit_b).
template <class Fn>
void merge_runs(const RLEMask& a, const RLEMask& b, Fn&& fn) {
  std::size_t ia = 0, ib = 0;
  std::uint64_t ra = a.counts.empty() ? 0 : a.counts[0];
  std::uint64_t rb = b.counts.empty() ? 0 : b.counts[0];
  bool va = false, vb = false;
  while (ia < a.counts.size() && ib < b.counts.size()) {
    const std::uint64_t step = std::min(ra, rb);
    if (step > 0) fn(step, va, vb);
    ra -= step;
    rb -= step;
    if (ra == 0 && ++ia < a.counts.size()) {
      ra = a.counts[ia];
      va = !va;
    }
    if (rb == 0 && ++ib < b.counts.size()) {
      rb = b.counts[ib];
      vb = !vb;
    }
  }
}

}  // namespace

std::size_t intersection_area(const RLEMask& a, const RLEMask& b) {
  check_same_size(a, b);
  std::size_t inter = 0;
  merge_runs(a, b, [&](std::uint64_t len, bool va, bool vb) {
    if (va && vb) inter += len;
  });
  return inter;
}

RLEMask mask_union(const RLEMask& a, const RLEMask& b) {
  check_same_size(a, b);
  RLEMask out;
  out.height = a.height;
  out.width = a.width;
  bool current = false;
  std::uint64_t run = 0;
  merge_runs(a, b, [&](std::uint64_t len, bool va, bool vb) {
    const bool v = va || vb;
    if (v != current) {
      out.counts.push_back(static_cast<std::uint32_t>(run));
      run = 0;
      current = v;
    }
    run += len;
  });
  out.counts.push_back(static_cast<std::uint32_t>(run));
  return out;
}

double mask_iou(const RLEMask& a, const RLEMask& b) {
  check_same_size(a, b);
  const std::size_t inter = intersection_area(a, b);
  const std::size_t uni = a.area() + b.area() - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

RLEMask rasterize_polygons(const std::vector<std::vector<double>>& polygons, std::size_t height,
                           std::size_t width) {
  BinaryMask mask(height, width);
  std::vector<double> crossings;
  for (const auto& poly : polygons) {
    if (poly.size() % 2 != 0 || poly.size() < 6) {
      throw ValidationError("polygon needs an even number (>= 6) of coordinates, got " +
                            std::to_string(poly.size()));
    }
    const std::size_t n = poly.size() / 2;
    for (std::size_t y = 0; y < height; ++y) {
      const double yc = static_cast<double>(y) + 0.5;
      crossings.clear();
      for (std::size_t i = 0; i < n; ++i) {
        const double x1 = poly[2 * i], y1 = poly[2 * i + 1];
        const double x2 = poly[2 * ((i + 1) % n)], y2 = poly[2 * ((i + 1) % n) + 1];
        if ((y1 > yc) != (y2 > yc)) crossings.push_back(x1 + (yc - y1) * (x2 - x1) / (y2 - y1));
      }
      std::sort(crossings.begin(), crossings.end());
      // Centers strictly between crossing pairs are inside.
      for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
        for (std::size_t x = 0; x < width; ++x) {
          const double xc = static_cast<double>(x) + 0.5;
          if (xc > crossings[k] && xc < crossings[k + 1]) mask.set(x, y);
        }
      }
    }
  }
  return RLEMask::encode(mask);
}

}  // namespace lowlight::eval
