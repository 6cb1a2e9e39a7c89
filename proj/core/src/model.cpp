#include "lnn/model.hpp"

#include <cmath>

#include "lnn/error.hpp"
#include "lnn/rng.hpp"

namespace lnn {

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

namespace {

Tensor init_head(std::size_t classes, std::size_t motor, Rng& rng) {
  Tensor w({classes, motor});
  const double bound = 1.0 / std::sqrt(static_cast<double>(motor));
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  return w;
}

template <class LiquidModel, class Slot>
void append_liquid_and_head(LiquidModel& m, std::vector<Slot>& out) {
  out.push_back({"liquid.tau", &m.liquid.tau});
  out.push_back({"liquid.w_rec", &m.liquid.w_rec});
  out.push_back({"liquid.gamma_rec", &m.liquid.gamma_rec});
  out.push_back({"liquid.mu_rec", &m.liquid.mu_rec});
  out.push_back({"liquid.a_rec", &m.liquid.a_rec});
  out.push_back({"liquid.w_in", &m.liquid.w_in});
  out.push_back({"liquid.gamma_in", &m.liquid.gamma_in});
  out.push_back({"liquid.mu_in", &m.liquid.mu_in});
  out.push_back({"liquid.a_in", &m.liquid.a_in});
  out.push_back({"head.w", &m.head_w});
  out.push_back({"head.b", &m.head_b});
}

template <class Slot, class M>
std::vector<Slot> model_slots(M& m) {
  std::vector<Slot> out;
  for (std::size_t l = 0; l < m.conv_params.size(); ++l) {
    out.push_back({"conv" + std::to_string(l) + ".kernels", &m.conv_params[l].kernels});
    out.push_back({"conv" + std::to_string(l) + ".bias", &m.conv_params[l].bias});
  }
  append_liquid_and_head(m, out);
  return out;
}

// Moves liquid gradients into the slot layout (liquid block starts at
// offset) and fills the head gradients. Returns dL/dx_final.
std::vector<double> head_backward(const Tensor& head_w, std::span<const double> motor,
                                  std::span<const double> d_logits, Tensor& d_head_w,
                                  Tensor& d_head_b, std::size_t n_liquid) {
  const std::size_t classes = head_w.dim(0), n_motor = head_w.dim(1);
  std::vector<double> d_final(n_liquid, 0.0);
  const std::size_t motor0 = n_liquid - n_motor;
  for (std::size_t c = 0; c < classes; ++c) {
    d_head_b[c] = d_logits[c];
    for (std::size_t j = 0; j < n_motor; ++j) {
      d_head_w(c, j) = d_logits[c] * motor[j];
      d_final[motor0 + j] += head_w(c, j) * d_logits[c];
    }
  }
  return d_final;
}

void store_liquid(LiquidGradients&& lg, std::vector<Tensor>& out, std::size_t offset) {
  out[offset + 0] = std::move(lg.tau);
  out[offset + 1] = std::move(lg.w_rec);
  out[offset + 2] = std::move(lg.gamma_rec);
  out[offset + 3] = std::move(lg.mu_rec);
  out[offset + 4] = std::move(lg.a_rec);
  out[offset + 5] = std::move(lg.w_in);
  out[offset + 6] = std::move(lg.gamma_in);
  out[offset + 7] = std::move(lg.mu_in);
  out[offset + 8] = std::move(lg.a_in);
}

std::vector<double> d_logits_of(const SoftmaxLoss& sm, std::size_t label) {
  std::vector<double> d = sm.probabilities;
  d[label] -= 1.0;
  return d;
}

std::span<const double> motor_slice(const LiquidState& x, std::size_t n_motor) {
  return std::span<const double>(x.x).subspan(x.size() - n_motor, n_motor);
}

}  // namespace

Model build_model(const ModelConfig& config) {
  Model m;
  m.conv = config.conv;
  if (m.conv.feature_dim() != config.wiring.n_sensory) {
    throw DimensionError("conv feature dimension " + std::to_string(m.conv.feature_dim()) +
                         " must equal wiring n_sensory " + std::to_string(config.wiring.n_sensory));
  }
  if (config.n_classes == 0) throw ParameterError("model needs at least one class");
  if (config.wiring.n_motor < config.n_classes) {
    throw SpecError("n_motor (" + std::to_string(config.wiring.n_motor) + ") < number of classes (" +
                    std::to_string(config.n_classes) + ")");
  }
  if (!(config.dt > 0.0)) throw ParameterError("model dt must be positive");
  if (config.steps_per_input == 0) throw ParameterError("steps_per_input must be positive");
  m.wiring = build_ncp(config.wiring);
  m.dt = config.dt;
  m.steps_per_input = config.steps_per_input;

  Rng rng(config.init_seed);
  for (const ConvLayerSpec& layer : m.conv.layers) m.conv_params.push_back(init_conv_layer(layer, rng));
  m.liquid = init_liquid_params(masks(m.wiring), rng, config.liquid_init);
  m.head_w = init_head(config.n_classes, config.wiring.n_motor, rng);
  m.head_b = Tensor({config.n_classes});
  return m;
}

std::size_t Model::parameter_count() const {
  std::size_t total = 0;
  for (const auto& slot : named_parameters(*this)) total += slot.value->size();
  return total;
}

void Model::validate() const {
  if (conv_params.size() != conv.layers.size()) throw DimensionError("conv parameter count mismatch");
  for (std::size_t l = 0; l < conv.layers.size(); ++l) {
    const ConvLayerSpec& s = conv.layers[l];
    require_shape(conv_params[l].kernels, {s.out_channels, s.in_channels, s.kernel, s.kernel},
                  "conv kernels");
    require_shape(conv_params[l].bias, {s.out_channels}, "conv bias");
  }
  const auto violations = lnn::validate(wiring);
  if (!violations.empty()) throw ValidationError("wiring: " + violations.front().message);
  liquid.validate();
  if (liquid.n_inputs != conv.feature_dim()) throw DimensionError("liquid inputs != conv features");
  if (liquid.n_neurons != wiring.spec.liquid()) throw DimensionError("liquid size != wiring");
  require_shape(head_w, {head_b.size(), wiring.spec.n_motor}, "head.w");
  if (!(dt > 0.0) || steps_per_input == 0) throw ParameterError("invalid dt / steps_per_input");
}

std::vector<NamedTensor> named_parameters(Model& m) { return model_slots<NamedTensor>(m); }
std::vector<NamedConstTensor> named_parameters(const Model& m) {
  return model_slots<NamedConstTensor>(m);
}

void Gradients::add_scaled(const Gradients& other, double factor) {
  if (other.tensors.size() != tensors.size()) throw DimensionError("gradient set size mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) tensors[i].add_scaled(other.tensors[i], factor);
}

Gradients zero_gradients(const Model& model) {
  Gradients g;
  for (const auto& slot : named_parameters(model)) g.tensors.push_back(Tensor::zeros_like(*slot.value));
  return g;
}

std::vector<double> extract_features(const Model& model, const Tensor& image) {
  model.conv.validate(image.shape());
  Tensor x = image;
  for (std::size_t l = 0; l < model.conv.layers.size(); ++l) {
    const ConvLayerSpec& s = model.conv.layers[l];
    x = relu(conv2d_forward(x, model.conv_params[l].kernels, model.conv_params[l].bias, s.stride, s.padding));
    if (s.pool) x = maxpool2x2(x).output;
  }
  return global_average_pool(x).values();
}

ForwardCache forward(const Model& model, const Tensor& image) {
  model.conv.validate(image.shape());
  ForwardCache cache;
  cache.image_shape = image.shape();
  Tensor x = image;
  for (std::size_t l = 0; l < model.conv.layers.size(); ++l) {
    const ConvLayerSpec& s = model.conv.layers[l];
    ConvLayerCache lc;
    lc.input = x;
    lc.pre_activation =
        conv2d_forward(x, model.conv_params[l].kernels, model.conv_params[l].bias, s.stride, s.padding);
    x = relu(lc.pre_activation);
    if (s.pool) {
      lc.pool_input_shape = x.shape();
      PoolResult pooled = maxpool2x2(x);
      lc.pool_argmax = std::move(pooled.argmax);
      x = std::move(pooled.output);
    }
    cache.conv.push_back(std::move(lc));
  }
  cache.gap_input_shape = x.shape();
  cache.features = global_average_pool(x).values();

  const LiquidState x0{std::vector<double>(model.liquid.n_neurons, 0.0)};
  Trajectory traj = unfold(x0, {cache.features}, model.liquid, model.dt, model.steps_per_input);
  cache.states.reserve(traj.states.size() + 1);
  cache.states.push_back(x0);
  for (auto& s : traj.states) cache.states.push_back(std::move(s));
  cache.logits = readout(motor_slice(traj.final_state, model.n_motor()), model.head_w, model.head_b);
  return cache;
}

BackwardResult backward(const Model& model, const ForwardCache& cache, std::size_t label) {
  const std::size_t L = model.liquid.n_neurons;
  if (cache.conv.size() != model.conv.layers.size() || cache.logits.size() != model.n_classes() ||
      cache.features.size() != model.liquid.n_inputs ||
      cache.states.size() != model.steps_per_input + 1 || cache.states.back().size() != L) {
    throw DimensionError("backward: forward cache does not match the model");
  }
  const SoftmaxLoss sm = softmax_cross_entropy(cache.logits, label);
  BackwardResult r;
  r.loss = sm.loss;
  r.probabilities = sm.probabilities;
  r.grads = zero_gradients(model);
  auto& g = r.grads.tensors;
  const std::size_t liquid0 = 2 * model.conv.layers.size();
  const std::size_t head0 = liquid0 + 9;

  const std::vector<double> d_logits = d_logits_of(sm, label);
  const std::vector<double> d_final = head_backward(
      model.head_w, motor_slice(cache.states.back(), model.n_motor()), d_logits, g[head0], g[head0 + 1], L);

  LiquidGradients lg = LiquidGradients::zeros_like(model.liquid);
  const auto d_inputs = unfold_backward(model.liquid, cache.states, {cache.features}, model.dt,
                                        model.steps_per_input, d_final, lg);
  store_liquid(std::move(lg), g, liquid0);

  Tensor d = global_average_pool_backward(cache.gap_input_shape, Tensor::vector(d_inputs[0]));
  for (std::size_t l = model.conv.layers.size(); l-- > 0;) {
    const ConvLayerSpec& s = model.conv.layers[l];
    const ConvLayerCache& lc = cache.conv[l];
    if (s.pool) d = maxpool2x2_backward(lc.pool_input_shape, lc.pool_argmax, d);
    d = relu_backward(lc.pre_activation, d);
    Conv2dGrads cg = conv2d_backward(lc.input, model.conv_params[l].kernels, s.stride, s.padding, d);
    g[2 * l] = std::move(cg.d_kernels);
    g[2 * l + 1] = std::move(cg.d_bias);
    d = std::move(cg.d_input);
  }
  return r;
}

SequenceModel build_sequence_model(const WiringSpec& wiring, std::size_t n_classes, double dt,
                                   std::size_t steps_per_input, std::uint64_t init_seed,
                                   const LiquidInit& init) {
  if (wiring.n_motor < n_classes) throw SpecError("n_motor < number of classes");
  if (!(dt > 0.0) || steps_per_input == 0) throw ParameterError("invalid dt / steps_per_input");
  SequenceModel m;
  m.wiring = build_ncp(wiring);
  m.dt = dt;
  m.steps_per_input = steps_per_input;
  Rng rng(init_seed);
  m.liquid = init_liquid_params(masks(m.wiring), rng, init);
  m.head_w = init_head(n_classes, wiring.n_motor, rng);
  m.head_b = Tensor({n_classes});
  return m;
}

std::vector<NamedTensor> named_parameters(SequenceModel& m) {
  std::vector<NamedTensor> out;
  append_liquid_and_head(m, out);
  return out;
}

std::vector<NamedConstTensor> named_parameters(const SequenceModel& m) {
  std::vector<NamedConstTensor> out;
  append_liquid_and_head(m, out);
  return out;
}

SequenceCache forward_sequence(const SequenceModel& model,
                               const std::vector<std::vector<double>>& inputs) {
  SequenceCache cache;
  cache.inputs = inputs;
  const LiquidState x0{std::vector<double>(model.liquid.n_neurons, 0.0)};
  Trajectory traj = unfold(x0, inputs, model.liquid, model.dt, model.steps_per_input);
  cache.states.push_back(x0);
  for (auto& s : traj.states) cache.states.push_back(std::move(s));
  const std::size_t n_motor = model.wiring.spec.n_motor;
  if (model.readout == SequenceReadout::kFinal) {
    const auto motor = motor_slice(cache.states.back(), n_motor);
    cache.readout_input.assign(motor.begin(), motor.end());
  } else {
    cache.readout_input.assign(n_motor, 0.0);
    for (std::size_t t = 1; t < cache.states.size(); ++t) {
      const auto motor = motor_slice(cache.states[t], n_motor);
      for (std::size_t j = 0; j < n_motor; ++j) cache.readout_input[j] += motor[j];
    }
    for (double& v : cache.readout_input) v /= static_cast<double>(cache.states.size() - 1);
  }
  cache.logits = readout(cache.readout_input, model.head_w, model.head_b);
  return cache;
}

BackwardResult backward_sequence(const SequenceModel& model, const SequenceCache& cache,
                                 std::size_t label) {
  const std::size_t L = model.liquid.n_neurons;
  const SoftmaxLoss sm = softmax_cross_entropy(cache.logits, label);
  BackwardResult r;
  r.loss = sm.loss;
  r.probabilities = sm.probabilities;
  for (const auto& slot : named_parameters(model)) r.grads.tensors.push_back(Tensor::zeros_like(*slot.value));
  auto& g = r.grads.tensors;
  const std::vector<double> d_logits = d_logits_of(sm, label);
  const std::vector<double> d_read = head_backward(model.head_w, cache.readout_input, d_logits, g[9], g[10], L);
  LiquidGradients lg = LiquidGradients::zeros_like(model.liquid);
  std::vector<std::vector<double>> d_states(cache.states.size());
  if (model.readout == SequenceReadout::kFinal) {
    d_states.back() = d_read;
  } else {
    const double share = 1.0 / static_cast<double>(cache.states.size() - 1);
    for (std::size_t t = 1; t < cache.states.size(); ++t) {
      d_states[t] = d_read;
      for (double& v : d_states[t]) v *= share;
    }
  }
  unfold_backward_states(model.liquid, cache.states, cache.inputs, model.dt, model.steps_per_input, d_states, lg);
  store_liquid(std::move(lg), g, 0);
  return r;
}

}  // namespace lnn
