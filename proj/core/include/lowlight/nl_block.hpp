#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <string>
#include <string_view>
#include <vector>

#include "lowlight/rng.hpp"
#include "lowlight/tensor.hpp"

namespace lowlight::nl {

// Pairwise similarity used by the non-local operation.
//   DotProduct:        A = (X θᵀ)(X φᵀ)ᵀ / N
//   Gaussian:          A = softmax_rows(X Xᵀ)
//   EmbeddedGaussian:  A = softmax_rows((X θᵀ)(X φᵀ)ᵀ)
enum class NLForm { DotProduct, Gaussian, EmbeddedGaussian };

inline constexpr NLForm kAllForms[] = {NLForm::DotProduct, NLForm::Gaussian,
                                       NLForm::EmbeddedGaussian};

// "dot-product", "gaussian", "embedded-gaussian"
std::string_view form_id(NLForm form);
// "Dot Product", "Gaussian", "Embedded Gaussian"
std::string_view form_label(NLForm form);
// Accepts form_id spellings; throws ArgumentError otherwise.
NLForm parse_form(std::string_view text);
// Only DotProduct and EmbeddedGaussian carry theta/phi embeddings.
constexpr bool uses_embeddings(NLForm form) { return form != NLForm::Gaussian; }

inline constexpr double kDefaultMixWeight = 0.1;

// Learnable state of one weighted NL block: z = w·(W_z·y + b) + (1 − w)·x.
struct NLBlockParams {
  NLForm form = NLForm::EmbeddedGaussian;
  std::size_t c_in = 0;
  std::size_t c_mid = 0;
  std::size_t reduction = 2;    // c_mid = c_in / reduction, reduction ∈ {2, 4}
  std::optional<Matrix> theta;  // (c_mid, c_in)
  std::optional<Matrix> phi;    // (c_mid, c_in)
  Matrix g;                     // (c_mid, c_in)
  Matrix wz;                    // (c_in, c_mid)
  std::vector<double> wz_bias;  // c_in
  double w = kDefaultMixWeight;

  // theta/phi uniform in ±1/sqrt(c_in); g semi-orthogonal; W_z = reduction·gᵀ;
  // zero bias; w = w_init.
  static NLBlockParams init(NLForm form, std::size_t c_in, std::size_t reduction, Rng& rng,
                            double w_init = kDefaultMixWeight);

  // Throws DimensionError/ArgumentError when shapes or w are inconsistent.
  void validate() const;
  void clamp_w();
  std::size_t parameter_count() const;

  friend bool operator==(const NLBlockParams&, const NLBlockParams&) = default;
};

// Mirrors NLBlockParams plus the gradient with respect to the block input.
struct NLGradients {
  std::optional<Matrix> theta;
  std::optional<Matrix> phi;
  Matrix g;
  Matrix wz;
  std::vector<double> wz_bias;
  double w = 0.0;
  Tensor d_input;

  static NLGradients zeros_like(const NLBlockParams& p);
  // Accumulates other into *this (parameters only; d_input is left untouched).
  void accumulate(const NLGradients& other);
};

// Named views of every learnable array in declaration order:
// theta, phi (when present), g, wz, wz_bias, w.
using NamedArray = std::pair<std::string_view, std::span<double>>;
std::vector<NamedArray> parameter_arrays(NLBlockParams& p);
// Same order as parameter_arrays; excludes d_input.
std::vector<NamedArray> gradient_arrays(NLGradients& g);

struct NLOutput {
  Tensor y;          // post-W_z output, shape (c_in, H, W)
  Matrix attention;  // (N, N)
};

NLOutput nl_operation(const Tensor& x, const NLBlockParams& p);

// Intermediates kept by block_forward for block_backward.
struct BlockCache {
  std::vector<std::size_t> input_shape;
  std::uint64_t params_fingerprint = 0;
  Matrix x;          // (N, C)
  Matrix theta_x;    // (N, c_mid); empty for Gaussian
  Matrix phi_x;      // (N, c_mid); empty for Gaussian
  Matrix g_x;        // (N, c_mid)
  Matrix attention;  // (N, N)
  Matrix pooled;     // attention · g_x, (N, c_mid)
  Matrix y;          // (N, C)
};

struct BlockOutput {
  Tensor z;
  BlockCache cache;
};

BlockOutput block_forward(const Tensor& x, const NLBlockParams& p);

// Throws ContractError if cache was produced with different parameters or d_z
// does not match the cached input shape.
NLGradients block_backward(const BlockCache& cache, const Tensor& d_z, const NLBlockParams& p);

// Hash of every parameter bit pattern; detects stale caches.
std::uint64_t fingerprint(const NLBlockParams& p);

struct GradcheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  std::size_t checked = 0;  // scalar components compared
  std::string worst;        // name and index of the worst component
};

inline constexpr double kGradcheckEpsilon = 1e-5;
inline constexpr double kGradcheckTolerance = 1e-5;
inline constexpr double kGradcheckFloor = 1e-8;

// Compares block_backward against central differences on every parameter and
// every input element for loss = Σ r ⊙ z with seeded random x, params and r.
// rel = |a − n| / max(|a|, |n|, kGradcheckFloor).
GradcheckReport gradcheck(NLForm form, std::size_t channels, std::size_t height,
                          std::size_t width, std::uint64_t seed, std::size_t reduction = 2);

}  // namespace lowlight::nl
