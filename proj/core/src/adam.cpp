#include "lnn/adam.hpp"

#include <cmath>

#include "lnn/error.hpp"

namespace lnn {

AdamState make_adam_state(const std::vector<NamedConstTensor>& params, const AdamConfig& config) {
  AdamState s;
  s.config = config;
  for (const auto& p : params) {
    s.m.push_back(Tensor::zeros_like(*p.value));
    s.v.push_back(Tensor::zeros_like(*p.value));
  }
  return s;
}

void adam_step(const std::vector<NamedTensor>& params, const Gradients& grads, AdamState& state) {
  if (grads.tensors.size() != params.size() || state.m.size() != params.size()) {
    throw DimensionError("adam: parameter / gradient / state count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads.tensors[i].shape() != params[i].value->shape()) {
      throw DimensionError("adam: gradient shape mismatch for " + params[i].name);
    }
    const std::size_t bad = grads.tensors[i].first_non_finite();
    if (bad != grads.tensors[i].size()) {
      throw NumericError("non-finite gradient in " + params[i].name + " at element " + std::to_string(bad));
    }
  }
  const AdamConfig& c = state.config;
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i].value;
    const Tensor& g = grads.tensors[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

void adam_update(Model& model, const Gradients& grads, AdamState& state, double tau_min) {
  adam_step(named_parameters(model), grads, state);
  model.liquid.project(tau_min);
}

void adam_update(SequenceModel& model, const Gradients& grads, AdamState& state, double tau_min) {
  adam_step(named_parameters(model), grads, state);
  model.liquid.project(tau_min);
}

}  // namespace lnn
