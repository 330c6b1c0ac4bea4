#pragma once

#include <cstdint>
#include <vector>

namespace lowlight::eval {

// Binary mask stored row-major: pixel (x, y) at index y * width + x.
struct BinaryMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  BinaryMask() = default;
  BinaryMask(std::size_t h, std::size_t w) : height(h), width(w), pixels(h * w, 0) {}
  bool at(std::size_t x, std::size_t y) const { return pixels[y * width + x] != 0; }
  void set(std::size_t x, std::size_t y, bool v = true) { pixels[y * width + x] = v ? 1 : 0; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

// COCO run-length encoding: alternating runs of 0s and 1s over the mask in
// column-major order, starting with a (possibly empty) run of 0s.
struct RLEMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint32_t> counts;

  static RLEMask encode(const BinaryMask& mask);
  BinaryMask decode() const;
  std::size_t area() const;
  // Throws ValidationError unless the counts cover exactly height * width pixels.
  void validate() const;

  friend bool operator==(const RLEMask&, const RLEMask&) = default;
};

std::size_t intersection_area(const RLEMask& a, const RLEMask& b);
RLEMask mask_union(const RLEMask& a, const RLEMask& b);

// |a ∩ b| / |a ∪ b|, 0 when both are empty. Throws ArgumentError on size mismatch.
double mask_iou(const RLEMask& a, const RLEMask& b);

// Even-odd fill sampled at pixel centers (x + 0.5, y + 0.5). Each polygon is a
// flat [x0, y0, x1, y1, ...] list; multiple polygons are unioned.
RLEMask rasterize_polygons(const std::vector<std::vector<double>>& polygons, std::size_t height,
                           std::size_t width);

}  // namespace lowlight::eval
