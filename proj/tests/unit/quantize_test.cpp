#include <gtest/gtest.h>

#include <cmath>

#include "lnn/error.hpp"
#include "lnn/quantize.hpp"
#include "lnn/rng.hpp"

namespace lnn {
namespace {

std::vector<Tensor> calibration_images(std::size_t n, std::size_t side, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor t({3, side, side});
    for (double& v : t.values()) v = rng.uniform();
    out.push_back(std::move(t));
  }
  return out;
}

TEST(RoundHalfAway, Ties) {
  EXPECT_EQ(round_half_away(0.5), 1);
  EXPECT_EQ(round_half_away(-0.5), -1);
  EXPECT_EQ(round_half_away(2.5), 3);
  EXPECT_EQ(round_half_away(-2.4999), -2);
}

TEST(QuantizeTensor, EightBitUnitRange) {
  const QuantizedTensor q = quantize_tensor(Tensor::vector({-1.0, 0.5, 1.0, 0.0}), 8);
  EXPECT_DOUBLE_EQ(q.scale, 1.0 / 127.0);
  EXPECT_EQ(q.data, (std::vector<std::int32_t>{-127, 64, 127, 0}));
  EXPECT_EQ(max_code(8), 127);
}

TEST(QuantizeTensor, AllZero) {
  const QuantizedTensor q = quantize_tensor(Tensor({5}), 16);
  EXPECT_EQ(q.scale, 1.0);
  for (std::int32_t v : q.data) EXPECT_EQ(v, 0);
}

TEST(QuantizeTensor, RoundTripWithinHalfScaleAtEveryWidth) {
  Rng rng(3);
  Tensor t({200});
  for (double& v : t.values()) v = rng.uniform(-4.0, 3.0);
  for (int bits : {8, 16, 32}) {
    const QuantizedTensor q = quantize_tensor(t, bits);
    const Tensor back = q.dequantize();
    for (std::size_t i = 0; i < t.size(); ++i) {
      EXPECT_LE(std::fabs(back[i] - t[i]), q.scale / 2.0 * (1.0 + 1e-12)) << bits;
      EXPECT_LE(std::llabs(q.data[i]), max_code(bits));
    }
  }
}

TEST(QuantizeWithScale, SaturatesOutsideRange) {
  const QuantizedTensor q = quantize_with_scale(Tensor::vector({10.0, -10.0, 0.3}), 0.01, 8);
  EXPECT_EQ(q.data, (std::vector<std::int32_t>{127, -127, 30}));
}

TEST(QuantizeModel, DefaultModelQ16RoundTrip) {
  const Model m = build_model(ModelConfig{});
  const QuantModel q = quantize_model(m, calibration_images(4, 16, 1), ChipSpec{});
  EXPECT_EQ(q.bits, 32);
  EXPECT_EQ(q.frac_bits, 16);
  const auto params = named_parameters(m);
  ASSERT_EQ(params.size(), q.tensors.size());
  const double bound = std::ldexp(1.0, -17);
  for (std::size_t p = 0; p < params.size(); ++p) {
    EXPECT_EQ(params[p].name, q.tensors[p].name);
    const Tensor& t = *params[p].value;
    const QuantizedTensor& qt = q.tensors[p].tensor;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double err = std::fabs(qt.value(i) - t[i]);
      EXPECT_LE(err, bound);
      EXPECT_LE(err, qt.scale / 2.0 * (1.0 + 1e-12));
    }
  }
  EXPECT_EQ(q.source_fingerprint, model_fingerprint(m));
  EXPECT_EQ(q.activations.size(), m.conv.layers.size() + 3);
  for (const ActivationRange& a : q.activations) EXPECT_GT(a.max_abs, 0.0) << a.stage;
}

TEST(QuantizeModel, DequantizeRebuildsModel) {
  const Model m = build_model(ModelConfig{});
  const QuantModel q = quantize_model(m, calibration_images(2, 16, 2), ChipSpec{});
  const Model d = dequantize_model(q);
  EXPECT_NO_THROW(d.validate());
  EXPECT_EQ(d.wiring, m.wiring);
  EXPECT_EQ(d.liquid.mask_rec, m.liquid.mask_rec);
  EXPECT_LE(std::fabs(d.head_w[0] - m.head_w[0]), q.tensor("head.w").scale);
}

TEST(QuantizeModel, RefusesUnreadyModelAndEmptyCalibration) {
  Model m = build_model(ModelConfig{});
  EXPECT_THROW(quantize_model(m, {}, ChipSpec{}), ParameterError);
  m.head_w[0] = std::nan("");
  EXPECT_THROW(quantize_model(m, calibration_images(1, 16, 3), ChipSpec{}), ValidationError);
}

TEST(Fingerprint, ChangesWithAnyParameter) {
  Model m = build_model(ModelConfig{});
  const std::uint64_t before = model_fingerprint(m);
  EXPECT_EQ(before, model_fingerprint(build_model(ModelConfig{})));
  m.liquid.tau[3] += 1e-12;
  EXPECT_NE(before, model_fingerprint(m));
}

}  // namespace
}  // namespace lnn
