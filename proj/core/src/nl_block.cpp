#include "lowlight/nl_block.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "lowlight/error.hpp"

namespace lowlight::nl {

std::string_view form_id(NLForm form) {
  switch (form) {
    case NLForm::DotProduct: return "dot-product";
    case NLForm::Gaussian: return "gaussian";
    case NLForm::EmbeddedGaussian: return "embedded-gaussian";
  }
  return "unknown";
}

std::string_view form_label(NLForm form) {
  switch (form) {
    case NLForm::DotProduct: return "Dot Product";
    case NLForm::Gaussian: return "Gaussian";
    case NLForm::EmbeddedGaussian: return "Embedded Gaussian";
  }
  return "unknown";
}

NLForm parse_form(std::string_view text) {
  for (NLForm f : kAllForms) {
    if (text == form_id(f)) return f;
  }
  throw ArgumentError("unknown NL form '" + std::string(text) +
                      "' (expected dot-product, gaussian or embedded-gaussian)");
}

namespace {

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-bound, bound);
  return m;
}

// Rows orthonormalized by Gram-Schmidt; requires rows <= cols.
Matrix semi_orthogonal(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m = uniform_matrix(rows, cols, 1.0, rng);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = m.row(r);
    for (std::size_t q = 0; q < r; ++q) {
      auto prev = m.row(q);
      double d = 0.0;
      for (std::size_t c = 0; c < cols; ++c) d += row[c] * prev[c];
      for (std::size_t c = 0; c < cols; ++c) row[c] -= d * prev[c];
    }
    double norm = 0.0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : row) v /= norm;
  }
  return m;
}

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(std::string(name) + " has shape " + m.shape_string() + ", expected (" +
                         std::to_string(rows) + "x" + std::to_string(cols) + ")");
  }
}

void check_finite(const Matrix& m, NLForm form, const char* stage) {
  for (double v : m.data()) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite " + std::string(stage) + " in " +
                         std::string(form_label(form)) + " NL operation");
    }
  }
}

struct Forward {
  Matrix x, theta_x, phi_x, g_x, attention, pooled, y;
};

Forward run_forward(const Tensor& input, const NLBlockParams& p) {
  if (input.rank() != 3) throw DimensionError("NL block expects (C,H,W), got " + input.shape_string());
  if (input.channels() != p.c_in) {
    throw DimensionError("NL block expects " + std::to_string(p.c_in) + " channels, got input " +
                         input.shape_string());
  }
  p.validate();
  Forward f;
  f.x = flatten_spatial(input);
  const double n = static_cast<double>(f.x.rows());
  f.g_x = matmul_bt(f.x, p.g);
  Matrix sim;
  if (uses_embeddings(p.form)) {
    f.theta_x = matmul_bt(f.x, *p.theta);
    f.phi_x = matmul_bt(f.x, *p.phi);
    sim = matmul_bt(f.theta_x, f.phi_x);
  } else {
    sim = matmul_bt(f.x, f.x);
  }
  check_finite(sim, p.form, "similarity");
  if (p.form == NLForm::DotProduct) {
    f.attention = std::move(sim);
    for (double& v : f.attention.data()) v /= n;
  } else {
    f.attention = softmax_rows(sim);
  }
  f.pooled = matmul(f.attention, f.g_x);
  f.y = matmul_bt(f.pooled, p.wz);
  for (std::size_t i = 0; i < f.y.rows(); ++i) {
    auto row = f.y.row(i);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += p.wz_bias[c];
  }
  check_finite(f.y, p.form, "output");
  return f;
}

void mix_hash(std::uint64_t& h, double v) {
  h ^= std::bit_cast<std::uint64_t>(v);
  h *= 0x100000001b3ULL;
  h ^= h >> 29;
}

void mix_matrix(std::uint64_t& h, const Matrix& m) {
  mix_hash(h, static_cast<double>(m.rows()));
  mix_hash(h, static_cast<double>(m.cols()));
  for (double v : m.data()) mix_hash(h, v);
}

std::span<double> span_of(Matrix& m) { return {m.data().data(), m.data().size()}; }

}  // namespace

NLBlockParams NLBlockParams::init(NLForm form, std::size_t c_in, std::size_t reduction, Rng& rng,
                                  double w_init) {
  if (reduction != 2 && reduction != 4) {
    throw ArgumentError("reduction must be 2 or 4, got " + std::to_string(reduction));
  }
  if (c_in == 0 || c_in % reduction != 0) {
    throw ArgumentError("channel count " + std::to_string(c_in) + " is not divisible by reduction " +
                        std::to_string(reduction));
  }
  NLBlockParams p;
  p.form = form;
  p.c_in = c_in;
  p.reduction = reduction;
  p.c_mid = c_in / reduction;
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(c_in));
  if (uses_embeddings(form)) {
    p.theta = uniform_matrix(p.c_mid, c_in, in_bound, rng);
    p.phi = uniform_matrix(p.c_mid, c_in, in_bound, rng);
  }
  // W_z starts as reduction * gᵀ: the value path begins as an attention-pooled
  // projection onto the bottleneck rescaled to the input's expected energy.
  // A random W_z makes the NL path worse than the skip path, so w collapses to
  // 0 and the block never trains.
  p.g = semi_orthogonal(p.c_mid, c_in, rng);
  p.wz = transpose(p.g);
  for (double& v : p.wz.data()) v *= static_cast<double>(reduction);
  p.wz_bias.assign(c_in, 0.0);
  p.w = w_init;
  p.validate();
  return p;
}

void NLBlockParams::validate() const {
  if (reduction != 2 && reduction != 4) {
    throw ArgumentError("reduction must be 2 or 4, got " + std::to_string(reduction));
  }
  if (c_in == 0 || c_mid * reduction != c_in) {
    throw DimensionError("c_mid (" + std::to_string(c_mid) + ") must equal c_in (" +
                         std::to_string(c_in) + ") / reduction (" + std::to_string(reduction) + ")");
  }
  if (uses_embeddings(form)) {
    if (!theta || !phi) throw DimensionError(std::string(form_label(form)) + " needs theta and phi");
    expect_shape(*theta, c_mid, c_in, "theta");
    expect_shape(*phi, c_mid, c_in, "phi");
  } else if (theta || phi) {
    throw DimensionError("Gaussian form carries no theta/phi embeddings");
  }
  expect_shape(g, c_mid, c_in, "g");
  expect_shape(wz, c_in, c_mid, "wz");
  if (wz_bias.size() != c_in) throw DimensionError("wz_bias must have c_in entries");
  if (!(w >= 0.0 && w <= 1.0)) throw ArgumentError("mixing weight w must lie in [0, 1]");
}

void NLBlockParams::clamp_w() { w = std::clamp(w, 0.0, 1.0); }

std::size_t NLBlockParams::parameter_count() const {
  std::size_t n = g.size() + wz.size() + wz_bias.size() + 1;
  if (theta) n += theta->size();
  if (phi) n += phi->size();
  return n;
}

NLGradients NLGradients::zeros_like(const NLBlockParams& p) {
  NLGradients g;
  if (p.theta) g.theta = Matrix(p.theta->rows(), p.theta->cols());
  if (p.phi) g.phi = Matrix(p.phi->rows(), p.phi->cols());
  g.g = Matrix(p.g.rows(), p.g.cols());
  g.wz = Matrix(p.wz.rows(), p.wz.cols());
  g.wz_bias.assign(p.wz_bias.size(), 0.0);
  g.w = 0.0;
  return g;
}

void NLGradients::accumulate(const NLGradients& other) {
  auto add = [](std::vector<double>& dst, const std::vector<double>& src) {
    if (dst.size() != src.size()) throw DimensionError("gradient accumulation shape mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  };
  if (theta && other.theta) add(theta->data(), other.theta->data());
  if (phi && other.phi) add(phi->data(), other.phi->data());
  add(g.data(), other.g.data());
  add(wz.data(), other.wz.data());
  add(wz_bias, other.wz_bias);
  w += other.w;
}

std::vector<NamedArray> parameter_arrays(NLBlockParams& p) {
  std::vector<NamedArray> out;
  if (p.theta) out.emplace_back("theta", span_of(*p.theta));
  if (p.phi) out.emplace_back("phi", span_of(*p.phi));
  out.emplace_back("g", span_of(p.g));
  out.emplace_back("wz", span_of(p.wz));
  out.emplace_back("wz_bias", std::span<double>(p.wz_bias));
  out.emplace_back("w", std::span<double>(&p.w, 1));
  return out;
}

std::vector<NamedArray> gradient_arrays(NLGradients& g) {
  std::vector<NamedArray> out;
  if (g.theta) out.emplace_back("theta", span_of(*g.theta));
  if (g.phi) out.emplace_back("phi", span_of(*g.phi));
  out.emplace_back("g", span_of(g.g));
  out.emplace_back("wz", span_of(g.wz));
  out.emplace_back("wz_bias", std::span<double>(g.wz_bias));
  out.emplace_back("w", std::span<double>(&g.w, 1));
  return out;
}

std::uint64_t fingerprint(const NLBlockParams& p) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  mix_hash(h, static_cast<double>(p.form));
  if (p.theta) mix_matrix(h, *p.theta);
  if (p.phi) mix_matrix(h, *p.phi);
  mix_matrix(h, p.g);
  mix_matrix(h, p.wz);
  for (double v : p.wz_bias) mix_hash(h, v);
  mix_hash(h, p.w);
  return h;
}

NLOutput nl_operation(const Tensor& x, const NLBlockParams& p) {
  Forward f = run_forward(x, p);
  return {unflatten_spatial(f.y, x.height(), x.width()), std::move(f.attention)};
}

BlockOutput block_forward(const Tensor& x, const NLBlockParams& p) {
  Forward f = run_forward(x, p);
  BlockOutput out;
  if (p.w == 0.0) {
    out.z = x;
  } else {
    Tensor y = unflatten_spatial(f.y, x.height(), x.width());
    out.z = Tensor(x.shape());
    const double keep = 1.0 - p.w;
    for (std::size_t i = 0; i < x.size(); ++i) {
      out.z.data()[i] = p.w * y.data()[i] + keep * x.data()[i];
    }
  }
  auto& c = out.cache;
  c.input_shape = x.shape();
  c.params_fingerprint = fingerprint(p);
  c.x = std::move(f.x);
  c.theta_x = std::move(f.theta_x);
  c.phi_x = std::move(f.phi_x);
  c.g_x = std::move(f.g_x);
  c.attention = std::move(f.attention);
  c.pooled = std::move(f.pooled);
  c.y = std::move(f.y);
  return out;
}

NLGradients block_backward(const BlockCache& cache, const Tensor& d_z, const NLBlockParams& p) {
  if (cache.input_shape.empty() || cache.params_fingerprint != fingerprint(p)) {
    throw ContractError("block_backward: cache does not belong to these parameters");
  }
  if (d_z.shape() != cache.input_shape) {
    throw ContractError("block_backward: upstream gradient " + d_z.shape_string() +
                        " does not match cached input shape");
  }
  const std::size_t n = cache.x.rows();
  const std::size_t channels = cache.x.cols();
  const Matrix dz = flatten_spatial(d_z);

  NLGradients grads;
  // z = w·y + (1 − w)·x
  Matrix dx(n, channels);
  Matrix dy(n, channels);
  double dw = 0.0;
  for (std::size_t i = 0; i < dz.size(); ++i) {
    const double g = dz.data()[i];
    dw += g * (cache.y.data()[i] - cache.x.data()[i]);
    dx.data()[i] = (1.0 - p.w) * g;
    dy.data()[i] = p.w * g;
  }
  grads.w = dw;

  // y = pooled · wzᵀ + b
  grads.wz_bias.assign(channels, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = dy.row(i);
    for (std::size_t c = 0; c < channels; ++c) grads.wz_bias[c] += row[c];
  }
  grads.wz = matmul_at(dy, cache.pooled);
  const Matrix d_pooled = matmul(dy, p.wz);

  // pooled = A · g_x
  const Matrix d_attention = matmul_bt(d_pooled, cache.g_x);
  const Matrix d_gx = matmul_at(cache.attention, d_pooled);
  grads.g = matmul_at(d_gx, cache.x);
  const Matrix dx_g = matmul(d_gx, p.g);
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data()[i] += dx_g.data()[i];

  // Back through the normalization to the raw similarity.
  Matrix d_sim(n, n);
  if (p.form == NLForm::DotProduct) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < d_sim.size(); ++i) d_sim.data()[i] = d_attention.data()[i] * inv_n;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      auto a = cache.attention.row(i);
      auto da = d_attention.row(i);
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += a[j] * da[j];
      auto ds = d_sim.row(i);
      for (std::size_t j = 0; j < n; ++j) ds[j] = a[j] * (da[j] - dot);
    }
  }

  if (uses_embeddings(p.form)) {
    // sim = theta_x · phi_xᵀ
    const Matrix d_theta_x = matmul(d_sim, cache.phi_x);
    const Matrix d_phi_x = matmul_at(d_sim, cache.theta_x);
    grads.theta = matmul_at(d_theta_x, cache.x);
    grads.phi = matmul_at(d_phi_x, cache.x);
    const Matrix a = matmul(d_theta_x, *p.theta);
    const Matrix b = matmul(d_phi_x, *p.phi);
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data()[i] += a.data()[i] + b.data()[i];
  } else {
    // sim = x · xᵀ
    const Matrix a = matmul(d_sim, cache.x);
    const Matrix b = matmul_at(d_sim, cache.x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data()[i] += a.data()[i] + b.data()[i];
  }

  grads.d_input = unflatten_spatial(dx, cache.input_shape[1], cache.input_shape[2]);
  return grads;
}

GradcheckReport gradcheck(NLForm form, std::size_t channels, std::size_t height,
                          std::size_t width, std::uint64_t seed, std::size_t reduction) {
  Rng rng(mix_seed(seed, 0x9c));
  NLBlockParams params = NLBlockParams::init(form, channels, reduction, rng);
  params.w = rng.uniform(0.2, 0.8);
  for (double& b : params.wz_bias) b = rng.uniform(-0.5, 0.5);
  Tensor x = Tensor::chw(channels, height, width);
  for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
  Tensor r = Tensor::chw(channels, height, width);
  for (double& v : r.data()) v = rng.uniform(-1.0, 1.0);

  // Σ r ⊙ (z₊ − z₋) accumulates elementwise differences, which loses less to
  // cancellation than differencing two summed losses.
  auto central = [&](const Tensor& z_up, const Tensor& z_down) {
    double s = 0.0;
    for (std::size_t i = 0; i < z_up.size(); ++i) {
      s += r.data()[i] * (z_up.data()[i] - z_down.data()[i]);
    }
    return s / (2.0 * kGradcheckEpsilon);
  };

  const BlockOutput fwd = block_forward(x, params);
  NLGradients analytic = block_backward(fwd.cache, r, params);

  GradcheckReport report;
  auto compare = [&](std::string_view name, std::size_t index, double a, double numeric) {
    const double denom = std::max({std::abs(a), std::abs(numeric), kGradcheckFloor});
    const double rel = std::abs(a - numeric) / denom;
    ++report.checked;
    if (!(rel <= report.max_rel_err)) {
      report.max_rel_err = std::isnan(rel) ? INFINITY : rel;
      report.worst = std::string(name) + "[" + std::to_string(index) + "]";
    }
  };

  const double eps = kGradcheckEpsilon;
  auto param_views = parameter_arrays(params);
  auto grad_views = gradient_arrays(analytic);
  for (std::size_t k = 0; k < param_views.size(); ++k) {
    auto [name, values] = param_views[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const Tensor up = block_forward(x, params).z;
      values[i] = saved - eps;
      const Tensor down = block_forward(x, params).z;
      values[i] = saved;
      compare(name, i, grad_views[k].second[i], central(up, down));
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + eps;
    const Tensor up = block_forward(x, params).z;
    x.data()[i] = saved - eps;
    const Tensor down = block_forward(x, params).z;
    x.data()[i] = saved;
    compare("input", i, analytic.d_input.data()[i], central(up, down));
  }
  report.pass = report.max_rel_err <= kGradcheckTolerance;
  return report;
}

}  // namespace lowlight::nl
