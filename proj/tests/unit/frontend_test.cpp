#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "lnn/error.hpp"
#include "lnn/frontend.hpp"
#include "lnn/rng.hpp"

namespace lnn {
namespace {

Tensor random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor t(shape);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Six nested loops, padding handled by bounds checks.
Tensor conv_oracle(const Tensor& in, const Tensor& k, const Tensor& b, std::size_t stride,
                   std::size_t pad) {
  const std::size_t C = in.dim(0), H = in.dim(1), W = in.dim(2);
  const std::size_t K = k.dim(0), ks = k.dim(2);
  const std::size_t Ho = (H + 2 * pad - ks) / stride + 1, Wo = (W + 2 * pad - ks) / stride + 1;
  Tensor out({K, Ho, Wo});
  for (std::size_t o = 0; o < K; ++o)
    for (std::size_t y = 0; y < Ho; ++y)
      for (std::size_t x = 0; x < Wo; ++x) {
        double acc = b[o];
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t i = 0; i < ks; ++i)
            for (std::size_t j = 0; j < ks; ++j) {
              const long yy = static_cast<long>(y * stride + i) - static_cast<long>(pad);
              const long xx = static_cast<long>(x * stride + j) - static_cast<long>(pad);
              if (yy < 0 || xx < 0 || yy >= static_cast<long>(H) || xx >= static_cast<long>(W)) continue;
              acc += k(o, c, i, j) * in(c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
            }
        out(o, y, x) = acc;
      }
  return out;
}

TEST(Conv2d, OnesTimesScalarKernel) {
  const Tensor in({1, 3, 3}, 1.0);
  const Tensor out = conv2d_forward(in, Tensor({1, 1, 1, 1}, 2.0), Tensor({1}), 1, 0);
  EXPECT_EQ(out.shape(), (Shape{1, 3, 3}));
  for (double v : out.values()) EXPECT_EQ(v, 2.0);
}

TEST(Conv2d, IdentityKernel) {
  const Tensor in = random_tensor({1, 5, 4}, 3);
  EXPECT_EQ(conv2d_forward(in, Tensor({1, 1, 1, 1}, 1.0), Tensor({1}), 1, 0), in);
}

TEST(Conv2d, MatchesLoopOracle) {
  const Tensor in = random_tensor({3, 8, 8}, 1);
  const Tensor k = random_tensor({4, 3, 3, 3}, 2);
  const Tensor b = random_tensor({4}, 3);
  for (std::size_t stride : {1u, 2u}) {
    for (std::size_t pad : {0u, 1u}) {
      const Tensor got = conv2d_forward(in, k, b, stride, pad);
      const Tensor want = conv_oracle(in, k, b, stride, pad);
      ASSERT_EQ(got.shape(), want.shape());
      for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
    }
  }
}

TEST(Conv2d, ShapeErrors) {
  const Tensor in({3, 4, 4});
  EXPECT_THROW(conv2d_forward(in, Tensor({2, 2, 3, 3}), Tensor({2}), 1, 1), DimensionError);
  EXPECT_THROW(conv2d_forward(in, Tensor({2, 3, 3, 3}), Tensor({3}), 1, 1), DimensionError);
  EXPECT_THROW(conv2d_forward(in, Tensor({2, 3, 7, 7}), Tensor({2}), 1, 0), DimensionError);
}

TEST(Conv2d, BackwardMatchesFiniteDifferences) {
  const Tensor in = random_tensor({2, 5, 5}, 10);
  Tensor k = random_tensor({3, 2, 3, 3}, 11);
  Tensor b = random_tensor({3}, 12);
  const Tensor w_out = random_tensor({3, 5, 5}, 13);
  auto loss = [&](const Tensor& x, const Tensor& kk, const Tensor& bb) {
    const Tensor y = conv2d_forward(x, kk, bb, 1, 1);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w_out[i];
    return s;
  };
  const Conv2dGrads g = conv2d_backward(in, k, 1, 1, w_out);
  const double h = 1e-6;
  Tensor x = in;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    x[i] = v + h;
    const double up = loss(x, k, b);
    x[i] = v - h;
    const double down = loss(x, k, b);
    x[i] = v;
    EXPECT_NEAR(g.d_input[i], (up - down) / (2 * h), 1e-7);
  }
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double v = k[i];
    k[i] = v + h;
    const double up = loss(in, k, b);
    k[i] = v - h;
    const double down = loss(in, k, b);
    k[i] = v;
    EXPECT_NEAR(g.d_kernels[i], (up - down) / (2 * h), 1e-7);
  }
  for (std::size_t o = 0; o < 3; ++o) {
    double s = 0.0;
    for (std::size_t p = 0; p < 25; ++p) s += w_out[o * 25 + p];
    EXPECT_NEAR(g.d_bias[o], s, 1e-12);
  }
}

TEST(MaxPool, ConstantInput) {
  const PoolResult r = maxpool2x2(Tensor({2, 4, 6}, 0.7));
  EXPECT_EQ(r.output.shape(), (Shape{2, 2, 3}));
  for (double v : r.output.values()) EXPECT_EQ(v, 0.7);
}

TEST(MaxPool, IncreasingRasterPicksBottomRight) {
  Tensor in({1, 4, 4});
  std::iota(in.values().begin(), in.values().end(), 0.0);
  const PoolResult r = maxpool2x2(in);
  EXPECT_EQ(r.output.values(), (std::vector<double>{5, 7, 13, 15}));
  EXPECT_EQ(r.argmax, (std::vector<std::uint32_t>{5, 7, 13, 15}));
}

TEST(MaxPool, MatchesLoopOracleAndRoutesGradient) {
  const Tensor in = random_tensor({3, 6, 8}, 5);
  const PoolResult r = maxpool2x2(in);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t x = 0; x < 4; ++x) {
        double m = -1e300;
        for (std::size_t i = 0; i < 2; ++i)
          for (std::size_t j = 0; j < 2; ++j) m = std::max(m, in(c, 2 * y + i, 2 * x + j));
        EXPECT_EQ(r.output(c, y, x), m);
      }
  const Tensor d_out = random_tensor(r.output.shape(), 6);
  const Tensor d_in = maxpool2x2_backward(in.shape(), r.argmax, d_out);
  double sum_in = 0.0, sum_out = 0.0;
  for (double v : d_in.values()) sum_in += v;
  for (double v : d_out.values()) sum_out += v;
  EXPECT_NEAR(sum_in, sum_out, 1e-12);
  for (std::size_t o = 0; o < r.argmax.size(); ++o) EXPECT_EQ(d_in[r.argmax[o]], d_out[o]);
}

TEST(MaxPool, OddExtentRejected) {
  EXPECT_THROW(maxpool2x2(Tensor({1, 3, 4})), DimensionError);
}

TEST(GlobalAveragePool, MeanPerChannelAndBackward) {
  Tensor in({2, 2, 2});
  std::iota(in.values().begin(), in.values().end(), 1.0);
  const Tensor g = global_average_pool(in);
  EXPECT_EQ(g.values(), (std::vector<double>{2.5, 6.5}));
  const Tensor d = global_average_pool_backward(in.shape(), Tensor::vector({4.0, 8.0}));
  EXPECT_EQ(d.values(), (std::vector<double>{1, 1, 1, 1, 2, 2, 2, 2}));
}

TEST(Relu, ForwardAndBackward) {
  const Tensor pre = Tensor::vector({-1.0, 0.0, 2.0});
  EXPECT_EQ(relu(pre).values(), (std::vector<double>{0.0, 0.0, 2.0}));
  EXPECT_EQ(relu_backward(pre, Tensor::vector({5.0, 5.0, 5.0})).values(),
            (std::vector<double>{0.0, 0.0, 5.0}));
}

TEST(Readout, ZeroWeightsGiveBias) {
  const std::vector<double> motor = {0.3, -0.2, 0.9};
  const auto logits = readout(motor, Tensor({2, 3}), Tensor::vector({0.5, -1.5}));
  EXPECT_EQ(logits, (std::vector<double>{0.5, -1.5}));
}

TEST(Readout, IdentityHeadPassesMotor) {
  const std::vector<double> motor = {0.3, -0.2, 0.9};
  Tensor w({3, 3});
  for (std::size_t i = 0; i < 3; ++i) w(i, i) = 1.0;
  EXPECT_EQ(readout(motor, w, Tensor({3})), motor);
}

TEST(Readout, MatchesMatrixVectorOracle) {
  const Tensor w = random_tensor({4, 6}, 1);
  const Tensor b = random_tensor({4}, 2);
  const Tensor m = random_tensor({6}, 3);
  const auto logits = readout(m.values(), w, b);
  for (std::size_t c = 0; c < 4; ++c) {
    double acc = b[c];
    for (std::size_t j = 0; j < 6; ++j) acc += w(c, j) * m[j];
    EXPECT_NEAR(logits[c], acc, 1e-14);
  }
  EXPECT_THROW(readout(m.values(), Tensor({4, 5}), b), DimensionError);
}

TEST(SoftmaxCrossEntropy, UniformLogits) {
  const std::vector<double> logits(10, 0.3);
  EXPECT_NEAR(softmax_cross_entropy(logits, 4).loss, std::log(10.0), 1e-12);
}

TEST(SoftmaxCrossEntropy, DominantLogitAndStability) {
  const std::vector<double> logits = {1e6, 0.0, -3.0};
  const SoftmaxLoss r = softmax_cross_entropy(logits, 0);
  EXPECT_NEAR(r.loss, 0.0, 1e-12);
  EXPECT_TRUE(std::isfinite(softmax_cross_entropy(logits, 1).loss));
  EXPECT_THROW(softmax_cross_entropy(logits, 3), ParameterError);
}

TEST(SoftmaxCrossEntropy, MatchesDirectFormula) {
  const Tensor l = random_tensor({7}, 9, -3.0, 3.0);
  const SoftmaxLoss r = softmax_cross_entropy(l.values(), 2);
  double z = 0.0;
  for (double v : l.values()) z += std::exp(v);
  EXPECT_NEAR(r.loss, -std::log(std::exp(l[2]) / z), 1e-12);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(r.probabilities[i], std::exp(l[i]) / z, 1e-14);
}

ConvSpec single_layer(std::size_t in, std::size_t out, std::size_t k, std::size_t pad, bool pool) {
  ConvSpec s;
  s.layers.push_back({in, out, k, 1, pad, pool});
  return s;
}

TEST(FeatureMacCount, OneByOneConv) {
  EXPECT_EQ(feature_mac_count(single_layer(1, 1, 1, 0, false), {1, 4, 4}), 16u);
}

TEST(FeatureMacCount, AdditiveOverLayers) {
  ConvSpec two = single_layer(1, 1, 1, 0, false);
  two.layers.push_back({1, 1, 1, 1, 0, false});
  EXPECT_EQ(feature_mac_count(two, {1, 4, 4}), 32u);
}

// Counts one MAC per kernel tap that visits a position of the padded input,
// which is how conv2d_forward iterates.
std::uint64_t counting_oracle(const ConvSpec& spec, Shape shape) {
  std::uint64_t macs = 0;
  for (const ConvLayerSpec& l : spec.layers) {
    const std::size_t Ho = (shape[1] + 2 * l.padding - l.kernel) / l.stride + 1;
    const std::size_t Wo = (shape[2] + 2 * l.padding - l.kernel) / l.stride + 1;
    for (std::size_t o = 0; o < l.out_channels; ++o)
      for (std::size_t y = 0; y < Ho; ++y)
        for (std::size_t x = 0; x < Wo; ++x)
          for (std::size_t c = 0; c < l.in_channels; ++c)
            for (std::size_t i = 0; i < l.kernel; ++i)
              for (std::size_t j = 0; j < l.kernel; ++j) ++macs;
    shape = {l.out_channels, l.pool ? Ho / 2 : Ho, l.pool ? Wo / 2 : Wo};
  }
  return macs;
}

TEST(FeatureMacCount, DefaultStackMatchesCountingOracle) {
  const ConvSpec spec = default_conv_spec();
  EXPECT_EQ(feature_mac_count(spec, {3, 32, 32}), counting_oracle(spec, {3, 32, 32}));
  EXPECT_EQ(feature_mac_count(spec, {3, 16, 16}), counting_oracle(spec, {3, 16, 16}));
  EXPECT_EQ(feature_mac_count(spec, {3, 16, 16}), 8u * 3 * 9 * 256 + 16u * 8 * 9 * 64);
}

TEST(ConvSpec, ValidateChainsAndExtents) {
  ConvSpec s = default_conv_spec();
  EXPECT_NO_THROW(s.validate({3, 16, 16}));
  EXPECT_THROW(s.validate({1, 16, 16}), DimensionError);
  EXPECT_THROW(s.validate({3, 6, 6}), DimensionError);
  s.layers[1].in_channels = 4;
  EXPECT_THROW(s.validate({3, 16, 16}), DimensionError);
}

}  // namespace
}  // namespace lnn
