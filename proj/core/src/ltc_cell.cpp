#include "lnn/ltc_cell.hpp"

#include <cmath>
#include <utility>
#include <string>

#include "lnn/error.hpp"
#include "lnn/ncp_wiring.hpp"

namespace lnn {

namespace {

void check_inputs(const LiquidState& x, std::span<const double> u, const LiquidCellParams& p) {
  if (x.size() != p.n_neurons) {
    throw DimensionError("liquid state has " + std::to_string(x.size()) + " neurons, cell has " +
                         std::to_string(p.n_neurons));
  }
  if (u.size() != p.n_inputs) {
    throw DimensionError("input vector has " + std::to_string(u.size()) + " channels, cell has " +
                         std::to_string(p.n_inputs));
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x.x[i])) throw NumericError("non-finite liquid state at neuron " + std::to_string(i));
  }
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (!std::isfinite(u[k])) throw NumericError("non-finite input at channel " + std::to_string(k));
  }
}

void check_dt(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw ParameterError("solver step dt must be positive and finite, got " + std::to_string(dt));
  }
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LiquidCellParams LiquidCellParams::zeros(std::size_t n, std::size_t m) {
  LiquidCellParams p;
  p.n_neurons = n;
  p.n_inputs = m;
  p.tau = Tensor({n}, 1.0);
  for (Tensor* t : {&p.w_rec, &p.gamma_rec, &p.mu_rec, &p.a_rec, &p.mask_rec}) *t = Tensor({n, n});
  for (Tensor* t : {&p.w_in, &p.gamma_in, &p.mu_in, &p.a_in, &p.mask_in}) *t = Tensor({n, m});
  return p;
}

void LiquidCellParams::validate() const {
  const std::size_t n = n_neurons, m = n_inputs;
  require_shape(tau, {n}, "liquid.tau");
  require_shape(w_rec, {n, n}, "liquid.w_rec");
  require_shape(gamma_rec, {n, n}, "liquid.gamma_rec");
  require_shape(mu_rec, {n, n}, "liquid.mu_rec");
  require_shape(a_rec, {n, n}, "liquid.a_rec");
  require_shape(mask_rec, {n, n}, "liquid.mask_rec");
  require_shape(w_in, {n, m}, "liquid.w_in");
  require_shape(gamma_in, {n, m}, "liquid.gamma_in");
  require_shape(mu_in, {n, m}, "liquid.mu_in");
  require_shape(a_in, {n, m}, "liquid.a_in");
  require_shape(mask_in, {n, m}, "liquid.mask_in");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(tau[i] > 0.0)) throw ParameterError("liquid.tau[" + std::to_string(i) + "] must be > 0");
    if (mask_rec(i, i) != 0.0) throw ParameterError("liquid.mask_rec has a self-connection at " + std::to_string(i));
  }
  auto check_w = [](const Tensor& w, const Tensor& mask, const char* name) {
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (mask[k] != 0.0 && mask[k] != 1.0) throw ParameterError(std::string(name) + " mask is not binary");
      if (w[k] < 0.0) throw ParameterError(std::string(name) + " has a negative weight at " + std::to_string(k));
      if (mask[k] == 0.0 && w[k] != 0.0) {
        throw ParameterError(std::string(name) + " has a weight on a masked-out synapse at " + std::to_string(k));
      }
    }
  };
  check_w(w_rec, mask_rec, "liquid.w_rec");
  check_w(w_in, mask_in, "liquid.w_in");
}

void LiquidCellParams::project(double tau_min) {
  for (std::size_t k = 0; k < w_rec.size(); ++k) {
    w_rec[k] = mask_rec[k] == 0.0 ? 0.0 : std::max(w_rec[k], 0.0);
  }
  for (std::size_t k = 0; k < w_in.size(); ++k) {
    w_in[k] = mask_in[k] == 0.0 ? 0.0 : std::max(w_in[k], 0.0);
  }
  for (double& t : tau.values()) t = std::max(t, tau_min);
}

void LiquidInit::validate() const {
  const std::pair<double, double> ranges[] = {{tau_lo, tau_hi}, {w_lo, w_hi}, {gamma_lo, gamma_hi},
                                              {mu_lo, mu_hi}, {a_lo, a_hi}};
  for (const auto& [lo, hi] : ranges) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) throw ParameterError("liquid init range is empty or non-finite");
  }
  if (tau_lo <= 0.0) throw ParameterError("liquid init needs tau > 0");
  if (w_lo < 0.0) throw ParameterError("liquid init needs w >= 0");
  if (a_lo < 0.0) throw ParameterError("liquid init reversal magnitudes must be >= 0");
}

LiquidCellParams init_liquid_params(const WiringMasks& m, Rng& rng, const LiquidInit& init) {
  init.validate();
  const std::size_t n = m.mask_rec.dim(0);
  const std::size_t inputs = m.mask_in.dim(1);
  LiquidCellParams p = LiquidCellParams::zeros(n, inputs);
  p.mask_rec = m.mask_rec;
  p.mask_in = m.mask_in;
  for (double& t : p.tau.values()) t = rng.uniform(init.tau_lo, init.tau_hi);
  auto fill = [&rng, &init](const Tensor& mask, const Tensor& sign, Tensor& w, Tensor& gamma, Tensor& mu,
                     Tensor& a) {
    for (std::size_t k = 0; k < mask.size(); ++k) {
      if (mask[k] == 0.0) continue;
      w[k] = rng.uniform(init.w_lo, init.w_hi);
      gamma[k] = rng.uniform(init.gamma_lo, init.gamma_hi);
      mu[k] = rng.uniform(init.mu_lo, init.mu_hi);
      a[k] = sign[k] * rng.uniform(init.a_lo, init.a_hi);
    }
  };
  fill(m.mask_rec, m.sign_rec, p.w_rec, p.gamma_rec, p.mu_rec, p.a_rec);
  fill(m.mask_in, m.sign_in, p.w_in, p.gamma_in, p.mu_in, p.a_in);
  return p;
}

SynapticDrive synaptic_drive(const LiquidState& x, std::span<const double> u,
                             const LiquidCellParams& p) {
  check_inputs(x, u, p);
  const std::size_t n = p.n_neurons, m = p.n_inputs;
  SynapticDrive d{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0, g = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t k = i * n + j;
      if (p.mask_rec[k] == 0.0) continue;
      const double f = p.mask_rec[k] * p.w_rec[k] * sigmoid(p.gamma_rec[k] * x.x[j] + p.mu_rec[k]);
      s += f;
      g += f * p.a_rec[k];
    }
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t k = i * m + j;
      if (p.mask_in[k] == 0.0) continue;
      const double f = p.mask_in[k] * p.w_in[k] * sigmoid(p.gamma_in[k] * u[j] + p.mu_in[k]);
      s += f;
      g += f * p.a_in[k];
    }
    d.s[i] = s;
    d.g[i] = g;
  }
  return d;
}

LiquidState fused_step(const LiquidState& x, std::span<const double> u, const LiquidCellParams& p,
                       double dt) {
  check_dt(dt);
  const SynapticDrive d = synaptic_drive(x, u, p);
  LiquidState next{std::vector<double>(p.n_neurons)};
  for (std::size_t i = 0; i < p.n_neurons; ++i) {
    next.x[i] = (x.x[i] + dt * d.g[i]) / (1.0 + dt * (1.0 / p.tau[i] + d.s[i]));
  }
  return next;
}

std::vector<double> liquid_derivative(const LiquidState& x, std::span<const double> u,
                                      const LiquidCellParams& p) {
  const SynapticDrive d = synaptic_drive(x, u, p);
  std::vector<double> dx(p.n_neurons);
  for (std::size_t i = 0; i < p.n_neurons; ++i) {
    dx[i] = -(1.0 / p.tau[i] + d.s[i]) * x.x[i] + d.g[i];
  }
  return dx;
}

LiquidState reference_step_rk4(const LiquidState& x, std::span<const double> u,
                               const LiquidCellParams& p, double dt) {
  check_dt(dt);
  const std::size_t n = p.n_neurons;
  auto offset = [&](const std::vector<double>& k, double h) {
    LiquidState y{x.x};
    for (std::size_t i = 0; i < n; ++i) y.x[i] += h * k[i];
    return y;
  };
  const auto k1 = liquid_derivative(x, u, p);
  const auto k2 = liquid_derivative(offset(k1, dt / 2), u, p);
  const auto k3 = liquid_derivative(offset(k2, dt / 2), u, p);
  const auto k4 = liquid_derivative(offset(k3, dt), u, p);
  LiquidState next{x.x};
  for (std::size_t i = 0; i < n; ++i) {
    next.x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return next;
}

Trajectory unfold(const LiquidState& x0, const std::vector<std::vector<double>>& u_seq,
                  const LiquidCellParams& p, double dt, std::size_t steps_per_input) {
  if (u_seq.empty()) throw ParameterError("unfold: input sequence is empty");
  if (steps_per_input == 0) throw ParameterError("unfold: steps_per_input must be positive");
  Trajectory traj;
  traj.states.reserve(u_seq.size() * steps_per_input);
  LiquidState x = x0;
  for (const auto& u : u_seq) {
    for (std::size_t s = 0; s < steps_per_input; ++s) {
      x = fused_step(x, u, p, dt);
      traj.states.push_back(x);
    }
  }
  traj.final_state = x;
  return traj;
}

LiquidGradients LiquidGradients::zeros_like(const LiquidCellParams& p) {
  return {Tensor::zeros_like(p.tau),      Tensor::zeros_like(p.w_rec), Tensor::zeros_like(p.gamma_rec),
          Tensor::zeros_like(p.mu_rec),   Tensor::zeros_like(p.a_rec), Tensor::zeros_like(p.w_in),
          Tensor::zeros_like(p.gamma_in), Tensor::zeros_like(p.mu_in), Tensor::zeros_like(p.a_in)};
}

std::vector<std::vector<double>> unfold_backward(const LiquidCellParams& p,
                                                 const std::vector<LiquidState>& states,
                                                 const std::vector<std::vector<double>>& u_seq,
                                                 double dt, std::size_t steps_per_input,
                                                 std::span<const double> d_final,
                                                 LiquidGradients& grads) {
  if (d_final.size() != p.n_neurons) throw DimensionError("unfold_backward: gradient size mismatch");
  std::vector<std::vector<double>> d_states(states.size());
  d_states.back().assign(d_final.begin(), d_final.end());
  return unfold_backward_states(p, states, u_seq, dt, steps_per_input, d_states, grads);
}

std::vector<std::vector<double>> unfold_backward_states(const LiquidCellParams& p,
                                                        const std::vector<LiquidState>& states,
                                                        const std::vector<std::vector<double>>& u_seq,
                                                        double dt, std::size_t steps_per_input,
                                                        const std::vector<std::vector<double>>& d_states,
                                                        LiquidGradients& grads) {
  const std::size_t n = p.n_neurons, m = p.n_inputs;
  if (states.size() != u_seq.size() * steps_per_input + 1) {
    throw DimensionError("unfold_backward: " + std::to_string(states.size()) +
                         " cached states do not match " + std::to_string(u_seq.size()) +
                         " inputs x " + std::to_string(steps_per_input) + " steps");
  }
  if (d_states.size() != states.size()) throw DimensionError("unfold_backward: one adjoint slot per state expected");
  for (const auto& d : d_states) {
    if (!d.empty() && d.size() != n) throw DimensionError("unfold_backward: gradient size mismatch");
  }

  std::vector<std::vector<double>> d_inputs(u_seq.size(), std::vector<double>(m, 0.0));
  std::vector<double> delta(n, 0.0);
  std::vector<double> q(n), d_prev(n);

  for (std::size_t step = states.size() - 1; step-- > 0;) {
    if (const auto& inject = d_states[step + 1]; !inject.empty()) {
      for (std::size_t i = 0; i < n; ++i) delta[i] += inject[i];
    }
    const LiquidState& x = states[step];
    const LiquidState& x_next = states[step + 1];
    const std::size_t input_index = step / steps_per_input;
    const std::vector<double>& u = u_seq[input_index];
    std::vector<double>& du = d_inputs[input_index];
    const SynapticDrive d = synaptic_drive(x, u, p);

    for (std::size_t i = 0; i < n; ++i) {
      const double den = 1.0 + dt * (1.0 / p.tau[i] + d.s[i]);
      q[i] = delta[i] / den;
      d_prev[i] = q[i];
      grads.tau[i] += q[i] * x_next.x[i] * dt / (p.tau[i] * p.tau[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k = i * n + j;
        if (p.mask_rec[k] == 0.0) continue;
        const double sg = sigmoid(p.gamma_rec[k] * x.x[j] + p.mu_rec[k]);
        const double f = p.w_rec[k] * sg;
        const double df = dt * q[i] * (p.a_rec[k] - x_next.x[i]);
        grads.a_rec[k] += dt * q[i] * f;
        grads.w_rec[k] += df * sg;
        const double dz = df * p.w_rec[k] * sg * (1.0 - sg);
        grads.gamma_rec[k] += dz * x.x[j];
        grads.mu_rec[k] += dz;
        d_prev[j] += dz * p.gamma_rec[k];
      }
      for (std::size_t j = 0; j < m; ++j) {
        const std::size_t k = i * m + j;
        if (p.mask_in[k] == 0.0) continue;
        const double sg = sigmoid(p.gamma_in[k] * u[j] + p.mu_in[k]);
        const double f = p.w_in[k] * sg;
        const double df = dt * q[i] * (p.a_in[k] - x_next.x[i]);
        grads.a_in[k] += dt * q[i] * f;
        grads.w_in[k] += df * sg;
        const double dz = df * p.w_in[k] * sg * (1.0 - sg);
        grads.gamma_in[k] += dz * u[j];
        grads.mu_in[k] += dz;
        du[j] += dz * p.gamma_in[k];
      }
    }
    delta.swap(d_prev);
  }
  return d_inputs;
}

}  // namespace lnn
