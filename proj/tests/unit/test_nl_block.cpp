#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "generators.hpp"
#include "lowlight/error.hpp"
#include "lowlight/nl_block.hpp"
#include "oracles.hpp"

using namespace lowlight;
using namespace lowlight::nl;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor permute_positions(const Tensor& x, const std::vector<std::size_t>& perm) {
  Tensor out(x.shape());
  const std::size_t n = x.height() * x.width();
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::size_t i = 0; i < n; ++i) out.data()[c * n + perm[i]] = x.data()[c * n + i];
  return out;
}

class FormTest : public ::testing::TestWithParam<NLForm> {};

}  // namespace

TEST(Form, IdsLabelsAndParsing) {
  for (NLForm f : kAllForms) EXPECT_EQ(parse_form(form_id(f)), f);
  EXPECT_EQ(form_id(NLForm::EmbeddedGaussian), "embedded-gaussian");
  EXPECT_EQ(form_label(NLForm::DotProduct), "Dot Product");
  EXPECT_THROW(parse_form("cosine"), ArgumentError);
  EXPECT_FALSE(uses_embeddings(NLForm::Gaussian));
}

TEST_P(FormTest, InitShapesAndStructure) {
  Rng rng(1);
  const auto p = NLBlockParams::init(GetParam(), 8, 4, rng);
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p.c_mid, 2u);
  EXPECT_EQ(p.w, kDefaultMixWeight);
  EXPECT_EQ(p.theta.has_value(), uses_embeddings(GetParam()));
  EXPECT_EQ(p.g.rows(), 2u);
  EXPECT_EQ(p.wz.rows(), 8u);
  // g has orthonormal rows.
  const auto ggt = matmul_bt(p.g, p.g);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(ggt(i, j), i == j ? 1.0 : 0.0, 1e-12);
  const std::size_t emb = uses_embeddings(GetParam()) ? 2 * 16 : 0;
  EXPECT_EQ(p.parameter_count(), emb + 16 + 16 + 8 + 1);
}

TEST(Params, InitRejectsBadReduction) {
  Rng rng(1);
  EXPECT_THROW(NLBlockParams::init(NLForm::Gaussian, 8, 3, rng), ArgumentError);
  EXPECT_THROW(NLBlockParams::init(NLForm::Gaussian, 6, 4, rng), ArgumentError);
}

TEST(Params, ValidateCatchesInconsistency) {
  Rng rng(2);
  auto p = NLBlockParams::init(NLForm::EmbeddedGaussian, 4, 2, rng);
  auto q = p;
  q.phi.reset();
  EXPECT_THROW(q.validate(), DimensionError);
  q = p;
  q.wz = Matrix(4, 3);
  EXPECT_THROW(q.validate(), DimensionError);
  q = p;
  q.c_mid = 1;
  EXPECT_THROW(q.validate(), DimensionError);
  q = p;
  q.wz_bias.pop_back();
  EXPECT_THROW(q.validate(), DimensionError);
  q = p;
  q.w = 1.2;
  EXPECT_THROW(q.validate(), ArgumentError);
  q.clamp_w();
  EXPECT_EQ(q.w, 1.0);
  q.w = -0.3;
  q.clamp_w();
  EXPECT_EQ(q.w, 0.0);
  auto g = NLBlockParams::init(NLForm::Gaussian, 4, 2, rng);
  g.theta = Matrix(2, 4);
  EXPECT_THROW(g.validate(), DimensionError);
}

TEST_P(FormTest, MatchesNaiveLoopOracle) {
  Rng rng(10 + static_cast<int>(GetParam()));
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t c = 2 * (1 + rng.below(3));
    const std::size_t h = 1 + rng.below(6), w = 1 + rng.below(6);
    const auto x = gen::random_tensor(rng, c, h, w);
    const auto p = gen::random_params(rng, GetParam(), c, 2, 0.5);
    const auto got = nl_operation(x, p);
    const auto ref = oracle::nl_operation(x, p);
    EXPECT_LE(max_abs_diff(got.y.data(), ref.y.data()), 1e-10);
    EXPECT_LE(max_abs_diff(got.attention.data(), ref.attention.data()), 1e-10);
  }
}

TEST(NLOperation, EmbeddedGaussianHandCase) {
  Rng rng(3);
  const auto x = gen::random_tensor(rng, 4, 2, 3);
  const auto p = gen::random_params(rng, NLForm::EmbeddedGaussian, 4, 2, 0.5);
  EXPECT_LE(max_abs_diff(nl_operation(x, p).y.data(), oracle::nl_operation(x, p).y.data()), 1e-10);
}

TEST(NLOperation, SinglePositionSoftmaxIsOne) {
  Rng rng(4);
  for (NLForm f : {NLForm::Gaussian, NLForm::EmbeddedGaussian}) {
    const auto x = gen::random_tensor(rng, 4, 1, 1, -30, 30);
    const auto p = gen::random_params(rng, f, 4, 2, 0.5);
    const auto out = nl_operation(x, p);
    EXPECT_EQ(out.attention(0, 0), 1.0);
    // y = Wz g x + b
    for (std::size_t c = 0; c < 4; ++c) {
      double v = p.wz_bias[c];
      for (std::size_t m = 0; m < 2; ++m) {
        double gx = 0.0;
        for (std::size_t k = 0; k < 4; ++k) gx += p.g(m, k) * x.data()[k];
        v += p.wz(c, m) * gx;
      }
      EXPECT_NEAR(out.y.data()[c], v, 1e-12);
    }
  }
}

TEST_P(FormTest, ConstantInputGivesIdenticalRowsAndConstantOutput) {
  Rng rng(5);
  const std::vector<double> v{0.3, -0.7, 0.2, 0.9};
  Tensor x = Tensor::chw(4, 3, 3);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 9; ++i) x.data()[c * 9 + i] = v[c];
  const auto p = gen::random_params(rng, GetParam(), 4, 2, 0.5);
  const auto out = nl_operation(x, p);
  for (std::size_t r = 1; r < 9; ++r)
    for (std::size_t j = 0; j < 9; ++j) EXPECT_EQ(out.attention(r, j), out.attention(0, j));
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 1; i < 9; ++i) EXPECT_NEAR(out.y.data()[c * 9 + i], out.y.data()[c * 9], 1e-14);
}

TEST(Attention, SoftmaxRowsAreDistributions) {
  Rng rng(6);
  for (NLForm form : {NLForm::Gaussian, NLForm::EmbeddedGaussian}) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto x = gen::random_tensor(rng, 4, 1 + rng.below(6), 1 + rng.below(6), -3, 3);
      const auto a = nl_operation(x, gen::random_params(rng, form, 4, 2, 0.5)).attention;
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0.0;
        for (double v : a.row(r)) {
          EXPECT_GE(v, 0.0);
          EXPECT_LE(v, 1.0);
          s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
      }
    }
  }
}

TEST(NLOperation, DotProductDividesByPositionCount) {
  Rng rng(7);
  const auto x = gen::random_tensor(rng, 4, 2, 3);
  const auto p = gen::random_params(rng, NLForm::DotProduct, 4, 2, 0.5);
  const auto a = nl_operation(x, p).attention;
  const auto X = flatten_spatial(x);
  const auto s = matmul_bt(matmul_bt(X, *p.theta), matmul_bt(X, *p.phi));
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(a.data()[i], s.data()[i] / 6.0, 1e-15);
}

TEST(NLOperation, Errors) {
  Rng rng(8);
  const auto p = gen::random_params(rng, NLForm::Gaussian, 4, 2, 0.5);
  EXPECT_THROW(nl_operation(Tensor::chw(3, 2, 2), p), DimensionError);
  Tensor x = gen::random_tensor(rng, 4, 2, 2);
  x.data()[3] = std::nan("");
  try {
    nl_operation(x, p);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("Gaussian"), std::string::npos);
  }
  Tensor big = gen::random_tensor(rng, 4, 2, 2, 1e200, 1e201);
  EXPECT_THROW(nl_operation(big, gen::random_params(rng, NLForm::DotProduct, 4, 2, 0.5)), NumericError);
}

TEST_P(FormTest, ZeroWeightIsBitExactIdentity) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = gen::random_tensor(rng, 4, 1 + rng.below(5), 1 + rng.below(5));
    x.data()[0] = -0.0;
    const auto p = gen::random_params(rng, GetParam(), 4, 2, 0.0);
    const auto z = block_forward(x, p).z;
    EXPECT_EQ(std::memcmp(z.data().data(), x.data().data(), x.size() * sizeof(double)), 0);
  }
}

TEST_P(FormTest, UnitWeightIsPureNLPath) {
  Rng rng(10);
  const auto x = gen::random_tensor(rng, 4, 3, 2);
  const auto p = gen::random_params(rng, GetParam(), 4, 2, 1.0);
  EXPECT_EQ(block_forward(x, p).z, nl_operation(x, p).y);
}

TEST_P(FormTest, HalfWeightMixesEqually) {
  Rng rng(11);
  const auto x = gen::random_tensor(rng, 4, 3, 3);
  const auto p = gen::random_params(rng, GetParam(), 4, 2, 0.5);
  const auto z = block_forward(x, p).z;
  const auto y = nl_operation(x, p).y;
  for (std::size_t i = 0; i < z.size(); ++i) {
    EXPECT_NEAR(z.data()[i], 0.5 * y.data()[i] + 0.5 * x.data()[i], 1e-15);
  }
  EXPECT_LE(max_abs_diff(z.data(), oracle::block_forward(x, p).data()), 1e-10);
}

TEST_P(FormTest, AffineInW) {
  Rng rng(12);
  const auto x = gen::random_tensor(rng, 4, 3, 3);
  auto p = gen::random_params(rng, GetParam(), 4, 2, 0.0);
  const auto z0 = block_forward(x, p).z;
  p.w = 1.0;
  const auto z1 = block_forward(x, p).z;
  p.w = 0.5;
  const auto zh = block_forward(x, p).z;
  for (std::size_t i = 0; i < zh.size(); ++i) {
    EXPECT_NEAR(zh.data()[i], 0.5 * (z0.data()[i] + z1.data()[i]), 1e-12);
  }
}

TEST_P(FormTest, PermutationEquivariance) {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t h = 1 + rng.below(6), w = 1 + rng.below(6), n = h * w;
    const auto x = gen::random_tensor(rng, 4, h, w);
    const auto p = gen::random_params(rng, GetParam(), 4, 2, rng.uniform());
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    const auto lhs = block_forward(permute_positions(x, perm), p).z;
    const auto rhs = permute_positions(block_forward(x, p).z, perm);
    EXPECT_LE(max_abs_diff(lhs.data(), rhs.data()), 1e-12);
  }
}

TEST_P(FormTest, ZeroUpstreamGivesZeroGradients) {
  Rng rng(14);
  const auto x = gen::random_tensor(rng, 4, 3, 3);
  const auto p = gen::random_params(rng, GetParam(), 4, 2, 0.4);
  const auto out = block_forward(x, p);
  auto g = block_backward(out.cache, Tensor(x.shape()), p);
  for (auto& [name, arr] : gradient_arrays(g))
    for (double v : arr) EXPECT_EQ(v, 0.0) << name;
  for (double v : g.d_input.data()) EXPECT_EQ(v, 0.0);
}

TEST_P(FormTest, ZeroWeightBackwardPassesUpstreamThrough) {
  Rng rng(15);
  const auto x = gen::random_tensor(rng, 4, 3, 3);
  const auto p = gen::random_params(rng, GetParam(), 4, 2, 0.0);
  const auto out = block_forward(x, p);
  const auto dz = gen::random_tensor(rng, 4, 3, 3);
  const auto g = block_backward(out.cache, dz, p);
  EXPECT_EQ(g.d_input, dz);
  const auto y = nl_operation(x, p).y;
  double dw = 0.0;
  for (std::size_t i = 0; i < dz.size(); ++i) dw += dz.data()[i] * (y.data()[i] - x.data()[i]);
  EXPECT_NEAR(g.w, dw, 1e-12 * std::max(1.0, std::abs(dw)));
  EXPECT_NE(g.w, 0.0);
}

// loss = sum(z), every component against an independent central difference.
TEST_P(FormTest, SumLossMatchesFiniteDifferences) {
  Rng rng(16);
  const auto x = gen::random_tensor(rng, 4, 3, 3);
  auto p = gen::random_params(rng, GetParam(), 4, 2, 0.6);
  const auto out = block_forward(x, p);
  auto grads = block_backward(out.cache, Tensor(x.shape(), 1.0), p);
  auto loss = [&](const NLBlockParams& q, const Tensor& in) {
    const auto z = block_forward(in, q).z;
    return std::accumulate(z.data().begin(), z.data().end(), 0.0);
  };
  auto rel = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8}); };
  const double eps = 1e-5;
  auto params = parameter_arrays(p);
  auto garr = gradient_arrays(grads);
  ASSERT_EQ(params.size(), garr.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    EXPECT_EQ(params[k].first, garr[k].first);
    for (std::size_t i = 0; i < params[k].second.size(); ++i) {
      double& v = params[k].second[i];
      const double saved = v;
      v = saved + eps;
      const double lp = loss(p, x);
      v = saved - eps;
      const double lm = loss(p, x);
      v = saved;
      EXPECT_LE(rel(garr[k].second[i], (lp - lm) / (2 * eps)), 1e-5) << params[k].first << "[" << i << "]";
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor xp = x, xm = x;
    xp.data()[i] += eps;
    xm.data()[i] -= eps;
    EXPECT_LE(rel(grads.d_input.data()[i], (loss(p, xp) - loss(p, xm)) / (2 * eps)), 1e-5) << "input[" << i << "]";
  }
}

TEST(Gradcheck, SpecExamplesPass) {
  EXPECT_TRUE(gradcheck(NLForm::EmbeddedGaussian, 4, 6, 6, 0).pass);
  EXPECT_TRUE(gradcheck(NLForm::DotProduct, 4, 6, 6, 0).pass);
  const auto g = gradcheck(NLForm::Gaussian, 2, 2, 2, 1);
  EXPECT_TRUE(g.pass) << g.max_rel_err << " " << g.worst;
  EXPECT_LE(g.max_rel_err, kGradcheckTolerance);
}

TEST_P(FormTest, GradcheckAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = gradcheck(GetParam(), 4, 6, 6, seed);
    EXPECT_TRUE(r.pass) << "seed " << seed << " err " << r.max_rel_err << " at " << r.worst;
    const std::size_t emb = uses_embeddings(GetParam()) ? 16 : 0;
    EXPECT_EQ(r.checked, emb + 8 + 8 + 4 + 1 + 4 * 36);
  }
}

TEST(Gradcheck, ReductionFourAndDeterminism) {
  const auto a = gradcheck(NLForm::EmbeddedGaussian, 8, 3, 3, 5, 4);
  const auto b = gradcheck(NLForm::EmbeddedGaussian, 8, 3, 3, 5, 4);
  EXPECT_TRUE(a.pass);
  EXPECT_EQ(a.max_rel_err, b.max_rel_err);
}

TEST(Backward, StaleCacheAndShapeMismatchAreContractErrors) {
  Rng rng(17);
  const auto x = gen::random_tensor(rng, 4, 2, 2);
  auto p = gen::random_params(rng, NLForm::EmbeddedGaussian, 4, 2, 0.3);
  const auto out = block_forward(x, p);
  EXPECT_THROW(block_backward(out.cache, Tensor::chw(4, 2, 3), p), ContractError);
  p.wz(0, 0) += 1e-12;
  EXPECT_THROW(block_backward(out.cache, Tensor(x.shape()), p), ContractError);
  EXPECT_THROW(block_backward(BlockCache{}, Tensor(x.shape()), p), ContractError);
}

TEST(Fingerprint, SensitiveToEveryArray) {
  Rng rng(18);
  auto p = gen::random_params(rng, NLForm::DotProduct, 4, 2, 0.3);
  const auto base = fingerprint(p);
  for (auto& [name, arr] : parameter_arrays(p)) {
    const double saved = arr[0];
    arr[0] = std::nextafter(saved, 10.0);
    EXPECT_NE(fingerprint(p), base) << name;
    arr[0] = saved;
  }
  EXPECT_EQ(fingerprint(p), base);
}

TEST(Gradients, ZerosLikeAndAccumulate) {
  Rng rng(19);
  const auto p = gen::random_params(rng, NLForm::EmbeddedGaussian, 4, 2, 0.3);
  auto a = NLGradients::zeros_like(p);
  EXPECT_EQ(a.theta->rows(), 2u);
  EXPECT_EQ(a.wz.rows(), 4u);
  EXPECT_EQ(a.wz_bias.size(), 4u);
  const auto x = gen::random_tensor(rng, 4, 2, 2);
  const auto out = block_forward(x, p);
  const auto g = block_backward(out.cache, gen::random_tensor(rng, 4, 2, 2), p);
  a.accumulate(g);
  a.accumulate(g);
  EXPECT_EQ(a.w, 2 * g.w);
  EXPECT_EQ(a.wz(1, 1), 2 * g.wz(1, 1));
  const auto names = [&] {
    std::vector<std::string> v;
    for (auto& [n, s] : gradient_arrays(a)) v.emplace_back(n);
    return v;
  }();
  EXPECT_EQ(names, (std::vector<std::string>{"theta", "phi", "g", "wz", "wz_bias", "w"}));
  auto other = NLGradients::zeros_like(gen::random_params(rng, NLForm::EmbeddedGaussian, 8, 2, 0.3));
  EXPECT_THROW(a.accumulate(other), DimensionError);
}

INSTANTIATE_TEST_SUITE_P(AllForms, FormTest, ::testing::ValuesIn(kAllForms),
                         [](const auto& info) {
                           std::string s(form_id(info.param));
                           s.erase(std::remove(s.begin(), s.end(), '-'), s.end());
                           return s;
                         });
