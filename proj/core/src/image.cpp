#include "lowlight/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "lowlight/error.hpp"

namespace lowlight {

Image8::Image8(std::size_t width, std::size_t height, std::uint8_t fill)
    : width_(width), height_(height), data_(width * height * 3, fill) {}

Image8::Image8(std::size_t width, std::size_t height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (data_.size() != width_ * height_ * 3) {
    throw ArgumentError("image buffer holds " + std::to_string(data_.size()) + " bytes, expected " +
                        std::to_string(width_ * height_ * 3));
  }
}

namespace {

std::string lower_ext(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

using FilePtr = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode), &std::fclose);
  if (!f) throw ArgumentError("cannot open " + path.string());
  return f;
}

// PPM header token reader that skips whitespace and '#' comments.
std::size_t read_ppm_int(std::istream& in, const std::filesystem::path& path) {
  int ch = in.peek();
  while (in && (std::isspace(ch) || ch == '#')) {
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      in.get();
    }
    ch = in.peek();
  }
  std::size_t v = 0;
  if (!(in >> v)) throw ParseError("malformed PPM header in " + path.string(),
                                   static_cast<std::size_t>(std::max<std::streamoff>(0, in.tellg())));
  return v;
}

}  // namespace

ImageFormat format_for(const std::filesystem::path& path) {
  const auto ext = lower_ext(path);
  if (ext == ".png") return ImageFormat::Png;
  if (ext == ".ppm") return ImageFormat::Ppm;
  throw ArgumentError("unsupported image extension: " + path.string());
}

bool is_image_path(const std::filesystem::path& path) {
  const auto ext = lower_ext(path);
  return ext == ".png" || ext == ".ppm";
}

Image8 read_image(const std::filesystem::path& path) {
  return format_for(path) == ImageFormat::Png ? read_png(path) : read_ppm(path);
}

void write_image(const std::filesystem::path& path, const Image8& img) {
  if (format_for(path) == ImageFormat::Png) {
    write_png(path, img);
  } else {
    write_ppm(path, img);
  }
}

Image8 read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P6") throw ParseError("not a binary PPM (P6): " + path.string(), 0);
  const auto w = read_ppm_int(in, path);
  const auto h = read_ppm_int(in, path);
  const auto maxval = read_ppm_int(in, path);
  if (w == 0 || h == 0) throw ArgumentError("zero-sized PPM: " + path.string());
  if (maxval != 255) {
    throw ParseError("only 8-bit PPM is supported (maxval 255): " + path.string(),
                     static_cast<std::size_t>(in.tellg()));
  }
  in.get();  // single whitespace before raster
  std::vector<std::uint8_t> data(w * h * 3);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (in.gcount() != static_cast<std::streamsize>(data.size())) {
    throw ParseError("truncated PPM raster: " + path.string(), static_cast<std::size_t>(in.gcount()));
  }
  return Image8(w, h, std::move(data));
}

void write_ppm(const std::filesystem::path& path, const Image8& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data().data()),
            static_cast<std::streamsize>(img.data().size()));
}

Image8 read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw ParseError("cannot decode PNG " + path.string() + ": " + image.message, 0);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, data.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw ParseError("cannot decode PNG " + path.string() + ": " + msg, 0);
  }
  return Image8(image.width, image.height, std::move(data));
}

void write_png(const std::filesystem::path& path, const Image8& img) {
  if (img.empty()) throw ArgumentError("cannot write an empty image");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  auto f = open_file(path, "wb");
  if (!png_image_write_to_stdio(&image, f.get(), 0, img.data().data(), 0, nullptr)) {
    throw ArgumentError("cannot encode PNG " + path.string() + ": " + image.message);
  }
}

}  // namespace lowlight
