#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lnn/rng.hpp"
#include "lnn/tensor.hpp"

namespace lnn {

struct WiringMasks;

// Liquid time-constant cell. Neuron i follows
//
//   dx_i/dt = -(1/tau_i) x_i - s_i(x, u) x_i + g_i(x, u)
//
// where every synapse j -> i contributes a sigmoid-gated conductance
//   f_ij = mask_ij * w_ij * sigmoid(gamma_ij * x_j + mu_ij)
// to s_i = sum_j f_ij and to g_i = sum_j f_ij * a_ij. Matrices are indexed
// (post, pre); input synapses read u_k in place of x_j.
struct LiquidCellParams {
  std::size_t n_neurons = 0;
  std::size_t n_inputs = 0;

  Tensor tau;  // [N], seconds

  Tensor w_rec, gamma_rec, mu_rec, a_rec, mask_rec;  // [N, N]
  Tensor w_in, gamma_in, mu_in, a_in, mask_in;       // [N, I]

  static LiquidCellParams zeros(std::size_t n_neurons, std::size_t n_inputs);

  // Shapes, tau > 0, w >= 0, w == 0 where masked out, zero mask diagonal.
  // Throws DimensionError / ParameterError.
  void validate() const;

  // Clamps w to >= 0 (and to 0 where masked out) and tau to >= tau_min.
  void project(double tau_min);

  friend bool operator==(const LiquidCellParams&, const LiquidCellParams&) = default;
};

// Uniform ranges for init_liquid_params; |a| is drawn from [a_lo, a_hi].
struct LiquidInit {
  double tau_lo = 0.5, tau_hi = 2.0;
  double w_lo = 0.01, w_hi = 0.3;
  double gamma_lo = 0.5, gamma_hi = 1.5;
  double mu_lo = -0.3, mu_hi = 0.3;
  double a_lo = 0.5, a_hi = 1.0;

  void validate() const;
  friend bool operator==(const LiquidInit&, const LiquidInit&) = default;
};

// Uniform initialization over the masked-in entries; the reversal sign is
// the wiring polarity.
LiquidCellParams init_liquid_params(const WiringMasks& masks, Rng& rng, const LiquidInit& init = {});

struct LiquidState {
  std::vector<double> x;

  std::size_t size() const { return x.size(); }
  friend bool operator==(const LiquidState&, const LiquidState&) = default;
};

struct SynapticDrive {
  std::vector<double> s;  // total conductance, >= 0
  std::vector<double> g;  // reversal-weighted drive
};

double sigmoid(double z);

SynapticDrive synaptic_drive(const LiquidState& x, std::span<const double> u,
                             const LiquidCellParams& p);

// Semi-implicit step x' = (x + dt g) / (1 + dt (1/tau + s)). The
// denominator exceeds one, so the state never grows past
// max(|x_i|, max incoming |a_ij|).
LiquidState fused_step(const LiquidState& x, std::span<const double> u,
                       const LiquidCellParams& p, double dt);

// Classical RK4 on the same right-hand side; a numerical reference only.
LiquidState reference_step_rk4(const LiquidState& x, std::span<const double> u,
                               const LiquidCellParams& p, double dt);

// Right-hand side dx/dt of the cell ODE.
std::vector<double> liquid_derivative(const LiquidState& x, std::span<const double> u,
                                      const LiquidCellParams& p);

struct Trajectory {
  std::vector<LiquidState> states;  // one entry per fused step (x0 excluded)
  LiquidState final_state;
};

// Holds each input for steps_per_input fused steps.
Trajectory unfold(const LiquidState& x0, const std::vector<std::vector<double>>& u_seq,
                  const LiquidCellParams& p, double dt, std::size_t steps_per_input);

// Gradient accumulators shaped like the trainable liquid tensors.
struct LiquidGradients {
  Tensor tau;
  Tensor w_rec, gamma_rec, mu_rec, a_rec;
  Tensor w_in, gamma_in, mu_in, a_in;

  static LiquidGradients zeros_like(const LiquidCellParams& p);
};

// Reverse-mode pass through an unfold that started at states.front() and
// visited states[1..] (so states.size() == u_seq.size() * steps + 1).
// d_final is dL/dx_final. Gradients are added into grads; the return value
// holds dL/du for every input vector.
std::vector<std::vector<double>> unfold_backward(const LiquidCellParams& p,
                                                 const std::vector<LiquidState>& states,
                                                 const std::vector<std::vector<double>>& u_seq,
                                                 double dt, std::size_t steps_per_input,
                                                 std::span<const double> d_final,
                                                 LiquidGradients& grads);

// Same pass with dL/dx injected at any visited state: d_states has one slot
// per entry of states, and an empty slot means zero.
std::vector<std::vector<double>> unfold_backward_states(const LiquidCellParams& p,
                                                        const std::vector<LiquidState>& states,
                                                        const std::vector<std::vector<double>>& u_seq,
                                                        double dt, std::size_t steps_per_input,
                                                        const std::vector<std::vector<double>>& d_states,
                                                        LiquidGradients& grads);

}  // namespace lnn
