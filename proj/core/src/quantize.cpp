#include "lnn/quantize.hpp"

#include <cmath>
#include <cstring>

#include "lnn/deploy.hpp"
#include "lnn/error.hpp"

namespace lnn {

std::int64_t round_half_away(double v) {
  return static_cast<std::int64_t>(v < 0.0 ? -std::floor(-v + 0.5) : std::floor(v + 0.5));
}

std::int64_t max_code(int bits) { return (std::int64_t{1} << (bits - 1)) - 1; }

double symmetric_scale(double max_abs, int bits) {
  if (bits < 2 || bits > 32) throw ParameterError("quantization width must be within [2, 32] bits");
  if (!(max_abs > 0.0)) return 1.0;
  return max_abs / static_cast<double>(max_code(bits));
}

Tensor QuantizedTensor::dequantize() const {
  Tensor t(shape);
  for (std::size_t i = 0; i < data.size(); ++i) t[i] = value(i);
  return t;
}

QuantizedTensor quantize_with_scale(const Tensor& t, double scale, int bits) {
  if (!(scale > 0.0)) throw ParameterError("quantization scale must be positive");
  const std::int64_t hi = max_code(bits);
  QuantizedTensor q{t.shape(), std::vector<std::int32_t>(t.size()), scale, bits};
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i])) throw NumericError("cannot quantize a non-finite value");
    const std::int64_t code = round_half_away(t[i] / scale);
    q.data[i] = static_cast<std::int32_t>(std::clamp(code, -hi, hi));
  }
  return q;
}

QuantizedTensor quantize_tensor(const Tensor& t, int bits) {
  return quantize_with_scale(t, symmetric_scale(t.max_abs(), bits), bits);
}

const QuantizedTensor& QuantModel::tensor(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.tensor;
  }
  throw FormatError("quantized model has no tensor '" + std::string(name) + "'");
}

std::uint64_t model_fingerprint(const Model& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& slot : named_parameters(model)) {
    mix(slot.name.data(), slot.name.size());
    for (std::size_t d : slot.value->shape()) {
      const std::uint64_t d64 = d;
      mix(&d64, sizeof d64);
    }
    mix(slot.value->values().data(), slot.value->size() * sizeof(double));
  }
  return h;
}

QuantModel quantize_model(const Model& model, const std::vector<Tensor>& calibration,
                          const ChipSpec& chip) {
  if (calibration.empty()) throw ParameterError("calibration batch is empty");
  const ReadinessReport ready = readiness_check(model, chip);
  if (!ready.pass()) throw ValidationError("model fails readiness checks:\n" + ready.to_text());

  QuantModel q;
  q.conv = model.conv;
  q.wiring = model.wiring;
  q.dt = model.dt;
  q.steps_per_input = model.steps_per_input;
  q.bits = chip.precision_bits;
  q.frac_bits = chip.frac_bits;
  q.source_fingerprint = model_fingerprint(model);
  for (const auto& slot : named_parameters(model)) {
    q.tensors.push_back({slot.name, quantize_tensor(*slot.value, q.bits)});
  }

  std::vector<double> maxima(model.conv.layers.size() + 3, 0.0);
  for (const Tensor& image : calibration) {
    const ForwardCache c = forward(model, image);
    // Max pooling keeps the largest activation, so the post-ReLU maximum
    // is also the stage output maximum.
    for (std::size_t l = 0; l < c.conv.size(); ++l) {
      maxima[l] = std::max(maxima[l], relu(c.conv[l].pre_activation).max_abs());
    }
    const std::size_t base = c.conv.size();
    for (double f : c.features) maxima[base] = std::max(maxima[base], std::fabs(f));
    for (const auto& s : c.states) {
      for (double v : s.x) maxima[base + 1] = std::max(maxima[base + 1], std::fabs(v));
    }
    for (double v : c.logits) maxima[base + 2] = std::max(maxima[base + 2], std::fabs(v));
  }
  for (std::size_t i = 0; i < maxima.size(); ++i) {
    std::string stage;
    if (i < model.conv.layers.size()) {
      stage = "conv" + std::to_string(i);
    } else {
      static const char* tail[] = {"features", "liquid", "logits"};
      stage = tail[i - model.conv.layers.size()];
    }
    q.activations.push_back({stage, maxima[i], symmetric_scale(maxima[i], q.bits)});
  }
  return q;
}

Model dequantize_model(const QuantModel& q) {
  Model m;
  m.conv = q.conv;
  m.wiring = q.wiring;
  m.dt = q.dt;
  m.steps_per_input = q.steps_per_input;
  m.conv_params.resize(q.conv.layers.size());
  const WiringMasks wm = masks(q.wiring);
  m.liquid = LiquidCellParams::zeros(q.wiring.spec.liquid(), q.wiring.spec.n_sensory);
  m.liquid.mask_rec = wm.mask_rec;
  m.liquid.mask_in = wm.mask_in;
  m.head_w = Tensor(q.tensor("head.w").shape);
  m.head_b = Tensor(q.tensor("head.b").shape);
  const auto slots = named_parameters(m);
  if (slots.size() != q.tensors.size()) {
    throw FormatError("quantized model holds " + std::to_string(q.tensors.size()) + " tensors, expected " +
                      std::to_string(slots.size()));
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].name != q.tensors[i].name) {
      throw FormatError("quantized tensor '" + q.tensors[i].name + "' where '" + slots[i].name + "' expected");
    }
    *slots[i].value = q.tensors[i].tensor.dequantize();
  }
  return m;
}

}  // namespace lnn
