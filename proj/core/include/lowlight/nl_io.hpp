#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lowlight/nl_block.hpp"

namespace lowlight::nl {

// Parameter container layout (all integers little-endian):
//
//   bytes 0..7    magic "NLBLOCK\0"
//   bytes 8..11   u32 format version (1)
//   bytes 12..15  u32 header length L
//   bytes 16..    L bytes of JSON header:
//                   {"form", "c_in", "c_mid", "reduction",
//                    "arrays": [{"name", "shape": [...]}, ...]}
//   then          IEEE-754 binary64 values, array after array in header order
//
// Array order is theta, phi (embedded forms only), g, wz, wz_bias, w.
inline constexpr std::uint32_t kParamsFormatVersion = 1;

std::vector<std::uint8_t> encode_params(const NLBlockParams& p);
// Throws ParseError on truncation, bad magic or header/array mismatch.
NLBlockParams decode_params(std::span<const std::uint8_t> bytes);

void save_params(const std::filesystem::path& path, const NLBlockParams& p);
NLBlockParams load_params(const std::filesystem::path& path);

// Little-endian helpers shared with the checkpoint writer.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_f64(std::vector<std::uint8_t>& out, double v);
std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset);
double get_f64(std::span<const std::uint8_t> bytes, std::size_t offset);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace lowlight::nl
