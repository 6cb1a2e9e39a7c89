#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lnn/chip.hpp"
#include "lnn/frontend.hpp"
#include "lnn/model.hpp"
#include "lnn/ncp_wiring.hpp"

namespace lnn {

// value = data[i] * scale; every entry fits a signed `bits`-wide integer.
struct QuantizedTensor {
  Shape shape;
  std::vector<std::int32_t> data;
  double scale = 1.0;
  int bits = 32;

  double value(std::size_t i) const { return static_cast<double>(data[i]) * scale; }
  Tensor dequantize() const;

  friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;
};

std::int64_t round_half_away(double v);
std::int64_t max_code(int bits);  // 2^(bits-1) - 1

// max_abs / (2^(bits-1) - 1); an all-zero range maps to scale 1.
double symmetric_scale(double max_abs, int bits);

// Per-tensor symmetric quantization, round half away from zero.
QuantizedTensor quantize_tensor(const Tensor& t, int bits);
// Same with a given scale; values beyond the range saturate.
QuantizedTensor quantize_with_scale(const Tensor& t, double scale, int bits);

struct ActivationRange {
  std::string stage;
  double max_abs = 0.0;
  double scale = 1.0;

  friend bool operator==(const ActivationRange&, const ActivationRange&) = default;
};

struct NamedQuantizedTensor {
  std::string name;
  QuantizedTensor tensor;

  friend bool operator==(const NamedQuantizedTensor&, const NamedQuantizedTensor&) = default;
};

// Fixed-point snapshot of a trained model. tensors mirror
// named_parameters(Model) one-to-one and in the same order.
struct QuantModel {
  ConvSpec conv;
  Wiring wiring;
  double dt = 0.1;
  std::size_t steps_per_input = 6;
  int bits = 32;
  int frac_bits = 16;
  std::vector<NamedQuantizedTensor> tensors;
  std::vector<ActivationRange> activations;
  std::uint64_t source_fingerprint = 0;

  const QuantizedTensor& tensor(std::string_view name) const;
  std::size_t n_classes() const { return tensor("head.b").data.size(); }

  friend bool operator==(const QuantModel&, const QuantModel&) = default;
};

// FNV-1a over parameter names, shapes and raw bytes.
std::uint64_t model_fingerprint(const Model& model);

// Weights take their scale from parameter statistics, activation scales
// from the calibration maxima. Throws ValidationError if the model fails
// readiness_check against chip.
QuantModel quantize_model(const Model& model, const std::vector<Tensor>& calibration,
                          const ChipSpec& chip);

// Float model rebuilt from the dequantized tensors.
Model dequantize_model(const QuantModel& qmodel);

}  // namespace lnn
