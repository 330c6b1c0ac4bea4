#include "lowlight/nl_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <nlohmann/json.hpp>

#include "lowlight/error.hpp"

namespace lowlight::nl {

namespace {

constexpr char kMagic[8] = {'N', 'L', 'B', 'L', 'O', 'C', 'K', '\0'};
constexpr std::size_t kPreamble = 16;

}  // namespace

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) throw ParseError("unexpected end of data", bytes.size());
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

double get_f64(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (offset + 8 > bytes.size()) throw ParseError("unexpected end of data", bytes.size());
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[offset + i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::vector<std::uint8_t> encode_params(const NLBlockParams& p) {
  p.validate();
  NLBlockParams copy = p;
  nlohmann::ordered_json header;
  header["form"] = std::string(form_id(p.form));
  header["c_in"] = p.c_in;
  header["c_mid"] = p.c_mid;
  header["reduction"] = p.reduction;
  header["arrays"] = nlohmann::ordered_json::array();
  auto arrays = parameter_arrays(copy);
  for (auto [name, values] : arrays) {
    nlohmann::ordered_json shape;
    if (name == "theta") shape = {p.theta->rows(), p.theta->cols()};
    else if (name == "phi") shape = {p.phi->rows(), p.phi->cols()};
    else if (name == "g") shape = {p.g.rows(), p.g.cols()};
    else if (name == "wz") shape = {p.wz.rows(), p.wz.cols()};
    else if (name == "wz_bias") shape = {p.wz_bias.size()};
    else shape = nlohmann::ordered_json::array();  // scalar w
    header["arrays"].push_back({{"name", name}, {"shape", shape}});
  }
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kParamsFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (auto [name, values] : arrays)
    for (double v : values) put_f64(out, v);
  return out;
}

NLBlockParams decode_params(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPreamble || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("not an NL block parameter container", 0);
  }
  const auto version = get_u32(bytes, 8);
  if (version != kParamsFormatVersion) {
    throw ParseError("unsupported parameter container version " + std::to_string(version), 8);
  }
  const auto header_len = get_u32(bytes, 12);
  if (kPreamble + header_len > bytes.size()) throw ParseError("truncated header", bytes.size());
  const std::string text(reinterpret_cast<const char*>(bytes.data()) + kPreamble, header_len);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("bad container header: ") + e.what(), kPreamble + e.byte);
  }

  NLBlockParams p;
  try {
    p.form = parse_form(header.at("form").get<std::string>());
    p.c_in = header.at("c_in").get<std::size_t>();
    p.c_mid = header.at("c_mid").get<std::size_t>();
    p.reduction = header.at("reduction").get<std::size_t>();
    if (uses_embeddings(p.form)) {
      p.theta = Matrix(p.c_mid, p.c_in);
      p.phi = Matrix(p.c_mid, p.c_in);
    }
    p.g = Matrix(p.c_mid, p.c_in);
    p.wz = Matrix(p.c_in, p.c_mid);
    p.wz_bias.assign(p.c_in, 0.0);

    auto arrays = parameter_arrays(p);
    const auto& declared = header.at("arrays");
    if (declared.size() != arrays.size()) throw ParseError("array count mismatch in header", 12);
    std::size_t offset = kPreamble + header_len;
    for (std::size_t k = 0; k < arrays.size(); ++k) {
      auto [name, values] = arrays[k];
      if (declared[k].at("name").get<std::string>() != name) {
        throw ParseError("expected array '" + std::string(name) + "' at position " +
                         std::to_string(k), kPreamble);
      }
      std::size_t count = 1;
      for (const auto& d : declared[k].at("shape")) count *= d.get<std::size_t>();
      if (count != values.size()) {
        throw ParseError("array '" + std::string(name) + "' has wrong size", kPreamble);
      }
      for (double& v : values) {
        v = get_f64(bytes, offset);
        offset += 8;
      }
    }
    if (offset != bytes.size()) throw ParseError("trailing bytes after parameter arrays", offset);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad container header: ") + e.what(), kPreamble);
  } catch (const ArgumentError& e) {
    throw ParseError(e.what(), kPreamble);
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("inconsistent parameters: ") + e.what(), kPreamble);
  }
  return p;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void save_params(const std::filesystem::path& path, const NLBlockParams& p) {
  write_file_bytes(path, encode_params(p));
}

NLBlockParams load_params(const std::filesystem::path& path) {
  return decode_params(read_file_bytes(path));
}

}  // namespace lowlight::nl
