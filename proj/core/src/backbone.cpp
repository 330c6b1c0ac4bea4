#include "lowlight/backbone.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include <nlohmann/json.hpp>

#include "lowlight/error.hpp"
#include "lowlight/nl_io.hpp"
#include "lowlight/rng.hpp"

namespace lowlight::backbone {

ToyBackbone ToyBackbone::create(const BackboneSpec& spec) {
  ToyBackbone bb;
  bb.spec = spec;
  Rng conv_rng(mix_seed(spec.seed, 1));
  Rng block_rng(mix_seed(spec.seed, 2));
  std::size_t c_in = spec.input_channels;
  for (std::size_t s = 0; s < kStages; ++s) {
    auto& st = bb.stages[s];
    st.c_in = c_in;
    st.c_out = spec.channels[s];
    const std::size_t fan_in = c_in * 9;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    st.weight = Matrix(st.c_out, fan_in);
    for (double& v : st.weight.data()) v = conv_rng.uniform(-bound, bound);
    st.bias.assign(st.c_out, 0.0);
    bb.nl_blocks[s] =
        nl::NLBlockParams::init(spec.form, st.c_out, spec.reductions[s], block_rng, spec.w_init);
    c_in = st.c_out;
  }
  return bb;
}

StageWeights ToyBackbone::stage_weights() const {
  StageWeights w{};
  for (std::size_t s = 0; s < kStages; ++s) w[s] = nl_blocks[s].w;
  return w;
}

void ToyBackbone::set_stage_weights(const StageWeights& w) {
  for (double v : w) {
    if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("stage weights must lie in [0, 1]");
  }
  for (std::size_t s = 0; s < kStages; ++s) nl_blocks[s].w = w[s];
}

Tensor image_to_tensor(const Image8& img) {
  if (img.empty()) throw ArgumentError("empty image");
  Tensor t = Tensor::chw(3, img.height(), img.width());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < img.height(); ++y)
      for (std::size_t x = 0; x < img.width(); ++x) t.at(c, y, x) = img.at(x, y, c) / 255.0;
  return t;
}

Tensor conv_forward(const Tensor& x, const ConvStage& st) {
  if (x.rank() != 3 || x.channels() != st.c_in) {
    throw DimensionError("conv stage expects " + std::to_string(st.c_in) + " channels, got " +
                         x.shape_string());
  }
  const std::size_t h = x.height(), w = x.width();
  const std::size_t oh = (h + 1) / 2, ow = (w + 1) / 2;
  Tensor out = Tensor::chw(st.c_out, oh, ow);
  for (std::size_t o = 0; o < st.c_out; ++o) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        double s = st.bias[o];
        for (std::size_t c = 0; c < st.c_in; ++c) {
          for (std::size_t ky = 0; ky < 3; ++ky) {
            const long yy = static_cast<long>(2 * i + ky) - 1;
            if (yy < 0 || yy >= static_cast<long>(h)) continue;
            for (std::size_t kx = 0; kx < 3; ++kx) {
              const long xx = static_cast<long>(2 * j + kx) - 1;
              if (xx < 0 || xx >= static_cast<long>(w)) continue;
              s += st.weight(o, (c * 3 + ky) * 3 + kx) *
                   x.at(c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
            }
          }
        }
        out.at(o, i, j) = s;
      }
    }
  }
  return out;
}

Tensor conv_backward_input(const Tensor& d_out, const ConvStage& st, std::size_t in_h,
                           std::size_t in_w) {
  Tensor dx = Tensor::chw(st.c_in, in_h, in_w);
  const std::size_t oh = d_out.height(), ow = d_out.width();
  for (std::size_t o = 0; o < st.c_out; ++o) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const double g = d_out.at(o, i, j);
        if (g == 0.0) continue;
        for (std::size_t c = 0; c < st.c_in; ++c) {
          for (std::size_t ky = 0; ky < 3; ++ky) {
            const long yy = static_cast<long>(2 * i + ky) - 1;
            if (yy < 0 || yy >= static_cast<long>(in_h)) continue;
            for (std::size_t kx = 0; kx < 3; ++kx) {
              const long xx = static_cast<long>(2 * j + kx) - 1;
              if (xx < 0 || xx >= static_cast<long>(in_w)) continue;
              dx.at(c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) +=
                  st.weight(o, (c * 3 + ky) * 3 + kx) * g;
            }
          }
        }
      }
    }
  }
  return dx;
}

ExtractTrace extract_traced(const Tensor& input, const ToyBackbone& bb, bool use_nl) {
  if (input.rank() != 3 || input.height() < kMinImageSide || input.width() < kMinImageSide) {
    throw ArgumentError("backbone input must be at least 16x16, got " + input.shape_string());
  }
  ExtractTrace trace;
  trace.use_nl = use_nl;
  Tensor current = input;
  for (std::size_t s = 0; s < kStages; ++s) {
    Tensor act = conv_forward(current, bb.stages[s]);
    for (double& v : act.data()) v = v > 0.0 ? v : 0.0;
    trace.pre_nl.push_back(act);
    if (use_nl) {
      auto out = nl::block_forward(act, bb.nl_blocks[s]);
      trace.caches[s] = std::move(out.cache);
      current = std::move(out.z);
    } else {
      current = std::move(act);
    }
    trace.features.push_back(current);
  }
  return trace;
}

FeaturePyramid extract(const Image8& img, const ToyBackbone& bb, bool use_nl) {
  if (img.width() < kMinImageSide || img.height() < kMinImageSide) {
    throw ArgumentError("image must be at least 16x16, got " + std::to_string(img.width()) + "x" +
                        std::to_string(img.height()));
  }
  return extract_traced(image_to_tensor(img), bb, use_nl).features;
}

std::array<nl::NLGradients, kStages> backward(const ExtractTrace& trace,
                                              const FeaturePyramid& d_features,
                                              const ToyBackbone& bb) {
  if (!trace.use_nl) throw ContractError("backward needs a trace extracted with use_nl");
  if (d_features.size() != kStages) throw DimensionError("expected 4 feature gradients");
  std::array<nl::NLGradients, kStages> grads;
  Tensor carry;  // gradient arriving at stage s's output from stage s + 1
  for (std::size_t k = kStages; k-- > 0;) {
    Tensor d_z = d_features[k];
    if (!d_z.same_shape(trace.features[k])) {
      throw DimensionError("feature gradient shape mismatch at stage " + std::to_string(k + 1));
    }
    if (k + 1 < kStages) {
      for (std::size_t i = 0; i < d_z.size(); ++i) d_z.data()[i] += carry.data()[i];
    }
    grads[k] = nl::block_backward(trace.caches[k], d_z, bb.nl_blocks[k]);
    if (k == 0) break;
    Tensor d_act = grads[k].d_input;
    const Tensor& act = trace.pre_nl[k];
    for (std::size_t i = 0; i < d_act.size(); ++i) {
      if (act.data()[i] <= 0.0) d_act.data()[i] = 0.0;
    }
    const Tensor& prev = trace.features[k - 1];
    carry = conv_backward_input(d_act, bb.stages[k], prev.height(), prev.width());
  }
  return grads;
}

LossResult feature_consistency_loss(const FeaturePyramid& noisy, const FeaturePyramid& clean) {
  if (noisy.size() != clean.size()) {
    throw DimensionError("pyramids have " + std::to_string(noisy.size()) + " and " +
                         std::to_string(clean.size()) + " levels");
  }
  std::size_t count = 0;
  for (std::size_t k = 0; k < noisy.size(); ++k) {
    if (!noisy[k].same_shape(clean[k])) {
      throw DimensionError("pyramid level " + std::to_string(k) + " shape mismatch: " +
                           noisy[k].shape_string() + " vs " + clean[k].shape_string());
    }
    count += noisy[k].size();
  }
  if (count == 0) throw DimensionError("empty pyramids");
  const double inv = 1.0 / static_cast<double>(count);
  LossResult r;
  double sum = 0.0;
  for (std::size_t k = 0; k < noisy.size(); ++k) {
    Tensor g(noisy[k].shape());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double d = noisy[k].data()[i] - clean[k].data()[i];
      sum += d * d;
      g.data()[i] = 2.0 * d * inv;
    }
    r.grad.push_back(std::move(g));
  }
  r.loss = sum * inv;
  return r;
}

namespace {

constexpr char kCkptMagic[8] = {'N', 'L', 'C', 'K', 'P', 'T', '\0', '\0'};
constexpr std::uint32_t kCkptVersion = 1;

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ToyBackbone& bb) {
  std::vector<std::vector<std::uint8_t>> blobs;
  for (const auto& p : bb.nl_blocks) blobs.push_back(nl::encode_params(p));

  nlohmann::ordered_json index;
  index["backbone"] = {{"input_channels", bb.spec.input_channels},
                       {"channels", bb.spec.channels},
                       {"reductions", bb.spec.reductions},
                       {"seed", bb.spec.seed},
                       {"form", std::string(nl::form_id(bb.spec.form))}};
  index["blocks"] = nlohmann::ordered_json::array();
  std::size_t offset = 0;
  for (std::size_t s = 0; s < kStages; ++s) {
    index["blocks"].push_back({{"stage", s + 1}, {"offset", offset}, {"length", blobs[s].size()}});
    offset += blobs[s].size();
  }
  const std::string text = index.dump();

  std::vector<std::uint8_t> out(std::begin(kCkptMagic), std::end(kCkptMagic));
  nl::put_u32(out, kCkptVersion);
  nl::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& b : blobs) out.insert(out.end(), b.begin(), b.end());
  return out;
}

ToyBackbone decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCkptMagic, sizeof(kCkptMagic)) != 0) {
    throw ParseError("not a backbone checkpoint", 0);
  }
  if (nl::get_u32(bytes, 8) != kCkptVersion) throw ParseError("unsupported checkpoint version", 8);
  const std::size_t len = nl::get_u32(bytes, 12);
  if (16 + len > bytes.size()) throw ParseError("truncated checkpoint index", bytes.size());
  const std::string text(reinterpret_cast<const char*>(bytes.data()) + 16, len);
  const std::size_t data_start = 16 + len;
  try {
    const auto index = nlohmann::json::parse(text);
    const auto& b = index.at("backbone");
    BackboneSpec spec;
    spec.input_channels = b.at("input_channels").get<std::size_t>();
    spec.channels = b.at("channels").get<std::array<std::size_t, kStages>>();
    spec.reductions = b.at("reductions").get<std::array<std::size_t, kStages>>();
    spec.seed = b.at("seed").get<std::uint64_t>();
    spec.form = nl::parse_form(b.at("form").get<std::string>());
    ToyBackbone bb = ToyBackbone::create(spec);
    const auto& blocks = index.at("blocks");
    if (blocks.size() != kStages) throw ParseError("checkpoint must hold 4 blocks", 16);
    for (std::size_t s = 0; s < kStages; ++s) {
      const std::size_t off = blocks[s].at("offset").get<std::size_t>();
      const std::size_t n = blocks[s].at("length").get<std::size_t>();
      if (data_start + off + n > bytes.size()) throw ParseError("block outside file", bytes.size());
      auto p = nl::decode_params(bytes.subspan(data_start + off, n));
      if (p.c_in != bb.stages[s].c_out) {
        throw ParseError("block " + std::to_string(s + 1) + " does not fit its stage", data_start + off);
      }
      bb.nl_blocks[s] = std::move(p);
    }
    return bb;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("bad checkpoint index: ") + e.what(), 16 + e.byte);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad checkpoint index: ") + e.what(), 16);
  } catch (const ArgumentError& e) {
    throw ParseError(std::string("bad checkpoint index: ") + e.what(), 16);
  }
}

void save_checkpoint(const std::filesystem::path& path, const ToyBackbone& bb) {
  nl::write_file_bytes(path, encode_checkpoint(bb));
}

ToyBackbone load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(nl::read_file_bytes(path));
}

}  // namespace lowlight::backbone
