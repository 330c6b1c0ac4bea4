#include "lowlight/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "lowlight/error.hpp"

namespace lowlight {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_shape(const std::vector<std::size_t>& shape) {
  if (shape.size() != 2 && shape.size() != 3) {
    throw DimensionError("tensor rank must be 2 or 3, got " + std::to_string(shape.size()));
  }
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be >= 1");
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("matrix " + shape_string() + " given " + std::to_string(data_.size()) +
                         " values");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

std::string Matrix::shape_string() const {
  return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(product(shape_), fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (product(shape_) != data_.size()) {
    throw DimensionError("tensor " + shape_string() + " given " + std::to_string(data_.size()) +
                         " values");
  }
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
  os << ")";
  return os.str();
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul shape mismatch: " + a.shape_string() + " * " + b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* o = out.data().data() + i * n;
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const double* br = b.data().data() + k * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += aik * br[j];
    }
  }
  return out;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_bt shape mismatch: " + a.shape_string() + " * " +
                         b.shape_string() + "^T");
  }
  Matrix out(a.rows(), b.rows());
  const std::size_t k_dim = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.data().data() + i * k_dim;
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* br = b.data().data() + j * k_dim;
      double s = 0.0;
      for (std::size_t k = 0; k < k_dim; ++k) s += ar[k] * br[k];
      out(i, j) = s;
    }
  }
  return out;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_at shape mismatch: " + a.shape_string() + "^T * " +
                         b.shape_string());
  }
  Matrix out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* br = b.data().data() + k * n;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      double* o = out.data().data() + i * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += aki * br[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto in = m.row(i);
    auto o = out.row(i);
    double mx = -INFINITY;
    for (double v : in) {
      if (!std::isfinite(v)) {
        throw NumericError("softmax_rows: non-finite entry in row " + std::to_string(i));
      }
      mx = std::max(mx, v);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (double& v : o) v /= sum;
  }
  return out;
}

Tensor conv1x1(const Tensor& x, const Matrix& weight, std::span<const double> bias) {
  if (x.rank() != 3) throw DimensionError("conv1x1 expects a rank-3 tensor, got " + x.shape_string());
  if (weight.cols() != x.channels()) {
    throw DimensionError("conv1x1 channel mismatch: weight " + weight.shape_string() +
                         " vs input " + x.shape_string());
  }
  if (bias.size() != weight.rows()) {
    throw DimensionError("conv1x1 bias length " + std::to_string(bias.size()) +
                         " != output channels " + std::to_string(weight.rows()));
  }
  const std::size_t hw = x.height() * x.width();
  Tensor out = Tensor::chw(weight.rows(), x.height(), x.width());
  for (std::size_t o = 0; o < weight.rows(); ++o) {
    double* dst = out.data().data() + o * hw;
    std::fill(dst, dst + hw, bias[o]);
    for (std::size_t c = 0; c < weight.cols(); ++c) {
      const double wv = weight(o, c);
      const double* src = x.data().data() + c * hw;
      for (std::size_t p = 0; p < hw; ++p) dst[p] += wv * src[p];
    }
  }
  return out;
}

Matrix flatten_spatial(const Tensor& x) {
  if (x.rank() != 3) {
    throw DimensionError("flatten_spatial expects a rank-3 tensor, got " + x.shape_string());
  }
  const std::size_t c = x.channels();
  const std::size_t hw = x.height() * x.width();
  Matrix m(hw, c);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < hw; ++p) m(p, ch) = x.data()[ch * hw + p];
  return m;
}

Tensor unflatten_spatial(const Matrix& m, std::size_t height, std::size_t width) {
  if (height * width != m.rows() || height == 0 || width == 0) {
    throw DimensionError("unflatten_spatial: " + std::to_string(height) + "x" +
                         std::to_string(width) + " does not match " + m.shape_string());
  }
  const std::size_t hw = m.rows();
  Tensor x = Tensor::chw(m.cols(), height, width);
  for (std::size_t ch = 0; ch < m.cols(); ++ch)
    for (std::size_t p = 0; p < hw; ++p) x.data()[ch * hw + p] = m(p, ch);
  return x;
}

}  // namespace lowlight
