#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lnn/frontend.hpp"
#include "lnn/ltc_cell.hpp"
#include "lnn/ncp_wiring.hpp"
#include "lnn/tensor.hpp"

namespace lnn {

struct ModelConfig {
  ConvSpec conv = default_conv_spec();
  WiringSpec wiring;
  double dt = 0.1;
  std::size_t steps_per_input = 6;
  std::size_t n_classes = 10;
  std::uint64_t init_seed = 1;
  LiquidInit liquid_init;
};

// Image classifier: conv frontend -> global average pool -> liquid cell
// (features held constant for steps_per_input fused steps from x0 = 0) ->
// affine readout of the motor neurons.
struct Model {
  ConvSpec conv;
  std::vector<ConvLayerParams> conv_params;
  Wiring wiring;
  LiquidCellParams liquid;
  Tensor head_w;  // [classes, n_motor]
  Tensor head_b;  // [classes]
  double dt = 0.1;
  std::size_t steps_per_input = 6;

  std::size_t n_classes() const { return head_b.size(); }
  std::size_t n_motor() const { return wiring.spec.n_motor; }
  std::size_t parameter_count() const;
  // Throws on any broken component invariant.
  void validate() const;

  friend bool operator==(const Model&, const Model&) = default;
};

Model build_model(const ModelConfig& config);

struct NamedTensor {
  std::string name;
  Tensor* value;
};

struct NamedConstTensor {
  std::string name;
  const Tensor* value;
};

// Trainable tensors in a fixed order: conv{l}.kernels, conv{l}.bias,
// liquid.{tau,w_rec,gamma_rec,mu_rec,a_rec,w_in,gamma_in,mu_in,a_in},
// head.w, head.b. Wiring masks are structure, not parameters.
std::vector<NamedTensor> named_parameters(Model& model);
std::vector<NamedConstTensor> named_parameters(const Model& model);

// One tensor per trainable parameter, aligned with named_parameters().
struct Gradients {
  std::vector<Tensor> tensors;

  void add_scaled(const Gradients& other, double factor);
};

Gradients zero_gradients(const Model& model);

struct ConvLayerCache {
  Tensor input;
  Tensor pre_activation;
  Shape pool_input_shape;
  std::vector<std::uint32_t> pool_argmax;

  friend bool operator==(const ConvLayerCache&, const ConvLayerCache&) = default;
};

struct ForwardCache {
  Shape image_shape;
  std::vector<ConvLayerCache> conv;
  Shape gap_input_shape;
  std::vector<double> features;
  std::vector<LiquidState> states;  // x0 followed by every fused step
  std::vector<double> logits;

  friend bool operator==(const ForwardCache&, const ForwardCache&) = default;
};

// Conv stack and pooling only: image [3,H,W] -> feature vector.
std::vector<double> extract_features(const Model& model, const Tensor& image);

ForwardCache forward(const Model& model, const Tensor& image);

struct BackwardResult {
  double loss = 0.0;
  std::vector<double> probabilities;
  Gradients grads;
};

// Exact reverse-mode gradients of softmax cross-entropy through the whole
// pipeline, including full backpropagation through time over every fused
// step. Throws DimensionError when the cache does not belong to model.
BackwardResult backward(const Model& model, const ForwardCache& cache, std::size_t label);

// kMean reads the motor neurons averaged over every fused step instead of
// at the last one.
enum class SequenceReadout : std::uint8_t { kFinal, kMean };

// Liquid cell + readout over an input sequence, no conv frontend.
struct SequenceModel {
  Wiring wiring;
  LiquidCellParams liquid;
  Tensor head_w;
  Tensor head_b;
  double dt = 0.1;
  std::size_t steps_per_input = 1;
  SequenceReadout readout = SequenceReadout::kFinal;

  std::size_t n_classes() const { return head_b.size(); }
};

SequenceModel build_sequence_model(const WiringSpec& wiring, std::size_t n_classes, double dt,
                                   std::size_t steps_per_input, std::uint64_t init_seed,
                                   const LiquidInit& init = {});

std::vector<NamedTensor> named_parameters(SequenceModel& model);
std::vector<NamedConstTensor> named_parameters(const SequenceModel& model);

struct SequenceCache {
  std::vector<std::vector<double>> inputs;
  std::vector<LiquidState> states;  // x0 followed by every fused step
  std::vector<double> readout_input;  // motor values fed to the head
  std::vector<double> logits;
};

SequenceCache forward_sequence(const SequenceModel& model,
                               const std::vector<std::vector<double>>& inputs);
BackwardResult backward_sequence(const SequenceModel& model, const SequenceCache& cache,
                                 std::size_t label);

// Index of the largest logit; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace lnn
