#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace lowlight {

// 8-bit interleaved RGB image, row-major.
class Image8 {
 public:
  Image8() = default;
  Image8(std::size_t width, std::size_t height, std::uint8_t fill = 0);
  Image8(std::size_t width, std::size_t height, std::vector<std::uint8_t> data);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  static constexpr std::size_t channels() noexcept { return 3; }
  bool empty() const noexcept { return data_.empty(); }

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
    return data_[(y * width_ + x) * 3 + c];
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return data_[(y * width_ + x) * 3 + c];
  }

  std::vector<std::uint8_t>& data() noexcept { return data_; }
  const std::vector<std::uint8_t>& data() const noexcept { return data_; }

  friend bool operator==(const Image8&, const Image8&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> data_;
};

enum class ImageFormat { Png, Ppm };

// Format from extension (.png, .ppm); throws ArgumentError otherwise.
ImageFormat format_for(const std::filesystem::path& path);
bool is_image_path(const std::filesystem::path& path);

// PNG inputs of any color type/bit depth are converted to 8-bit RGB.
Image8 read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image8& img);

Image8 read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image8& img);
Image8 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image8& img);

}  // namespace lowlight
