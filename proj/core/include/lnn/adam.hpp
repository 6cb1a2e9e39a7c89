#pragma once

#include <cstdint>
#include <vector>

#include "lnn/model.hpp"

namespace lnn {

inline constexpr double kTauMin = 0.05;

struct AdamConfig {
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t t = 0;
  std::vector<Tensor> m;  // first moments, one per parameter tensor
  std::vector<Tensor> v;  // second moments
};

AdamState make_adam_state(const std::vector<NamedConstTensor>& params, const AdamConfig& config);

// Bias-corrected Adam step on every tensor. All gradients are checked for
// finiteness before anything is modified; a NumericError names the tensor.
void adam_step(const std::vector<NamedTensor>& params, const Gradients& grads, AdamState& state);

// adam_step followed by the liquid projection (w >= 0, tau >= tau_min).
void adam_update(Model& model, const Gradients& grads, AdamState& state, double tau_min = kTauMin);
void adam_update(SequenceModel& model, const Gradients& grads, AdamState& state,
                 double tau_min = kTauMin);

}  // namespace lnn
