#include "lnn/deploy.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "lnn/error.hpp"

namespace lnn {

void ChipSpec::validate() const {
  if (core_count < 1) throw ConfigError("chip.core_count must be >= 1");
  if (precision_bits != 8 && precision_bits != 16 && precision_bits != 32) {
    throw ConfigError("chip.precision_bits must be 8, 16 or 32, got " + std::to_string(precision_bits));
  }
  if (frac_bits < 0 || frac_bits >= precision_bits) {
    throw ConfigError("chip.frac_bits must lie in [0, precision_bits), got " + std::to_string(frac_bits));
  }
  if (energy_per_mac_joules < 0.0) throw ConfigError("chip.energy_per_mac must be >= 0");
  if (static_joules_per_frame < 0.0) throw ConfigError("chip.static_per_frame must be >= 0");
}

bool ReadinessReport::pass() const {
  return std::all_of(items.begin(), items.end(), [](const ReadinessItem& i) { return i.pass; });
}

std::string ReadinessReport::to_text() const {
  std::ostringstream out;
  for (const ReadinessItem& i : items) {
    out << (i.pass ? "[pass] " : "[FAIL] ") << i.name << ": measured " << i.measured << ", limit "
        << i.limit << '\n';
  }
  out << (pass() ? "READY" : "NOT READY") << '\n';
  return out.str();
}

std::vector<std::size_t> neuron_synapse_tally(const Wiring& w) {
  const std::size_t S = w.spec.n_sensory;
  std::vector<std::size_t> tally(w.spec.liquid(), S);
  for (std::size_t src = S; src < w.n; ++src) {
    for (std::size_t dst = S; dst < w.n; ++dst) tally[dst - S] += w.has_edge(src, dst);
  }
  return tally;
}

ReadinessReport readiness_check(const Model& model, const ChipSpec& chip) {
  ReadinessReport r;
  for (const auto& slot : named_parameters(model)) {
    const std::size_t bad = slot.value->first_non_finite();
    const bool ok = bad == slot.value->size();
    r.items.push_back({"finite " + slot.name, ok,
                       ok ? "all finite" : "non-finite at element " + std::to_string(bad), "finite"});
  }
  const auto violations = validate(model.wiring);
  r.items.push_back({"wiring valid", violations.empty(),
                     violations.empty() ? "0 violations"
                                        : std::to_string(violations.size()) + " violations (" +
                                              violations.front().message + ")",
                     "0 violations"});
  try {
    chip.validate();
    r.items.push_back({"chip spec", true, "valid", "valid"});
  } catch (const ConfigError& e) {
    r.items.push_back({"chip spec", false, e.what(), "valid"});
  }
  const std::size_t neurons = model.wiring.spec.liquid();
  const std::size_t neuron_limit = chip.core_count * chip.neurons_per_core;
  r.items.push_back({"neuron capacity", neurons <= neuron_limit, std::to_string(neurons),
                     std::to_string(neuron_limit)});
  if (violations.empty()) {
    const auto tally = neuron_synapse_tally(model.wiring);
    std::size_t total = 0, largest = 0;
    for (std::size_t t : tally) {
      total += t;
      largest = std::max(largest, t);
    }
    const std::size_t synapse_limit = chip.core_count * chip.synapses_per_core;
    r.items.push_back({"synapse capacity", total <= synapse_limit, std::to_string(total),
                       std::to_string(synapse_limit)});
    r.items.push_back({"largest neuron fits one core", largest <= chip.synapses_per_core,
                       std::to_string(largest), std::to_string(chip.synapses_per_core)});
  }
  return r;
}

namespace {

void fill_plan_tallies(ExecutionPlan& plan, const QuantModel& q, const ChipSpec& chip) {
  const auto tally = neuron_synapse_tally(q.wiring);
  plan.core_neurons.assign(chip.core_count, 0);
  plan.core_synapses.assign(chip.core_count, 0);
  for (std::size_t i = 0; i < plan.neuron_core.size(); ++i) {
    const std::size_t core = plan.neuron_core[i];
    if (core >= chip.core_count) {
      throw CompileError("neuron " + std::to_string(i) + " mapped to core " + std::to_string(core) +
                         " of a " + std::to_string(chip.core_count) + "-core chip");
    }
    ++plan.core_neurons[core];
    plan.core_synapses[core] += tally[i];
  }
  for (std::size_t c = 0; c < chip.core_count; ++c) {
    if (plan.core_neurons[c] > chip.neurons_per_core) {
      throw CompileError("core " + std::to_string(c) + " holds " + std::to_string(plan.core_neurons[c]) +
                         " neurons, limit neurons_per_core=" + std::to_string(chip.neurons_per_core));
    }
    if (plan.core_synapses[c] > chip.synapses_per_core) {
      throw CompileError("core " + std::to_string(c) + " holds " + std::to_string(plan.core_synapses[c]) +
                         " synapses, limit synapses_per_core=" + std::to_string(chip.synapses_per_core));
    }
  }
  plan.stage_order.clear();
  for (std::size_t l = 0; l < q.conv.layers.size(); ++l) plan.stage_order.push_back("conv" + std::to_string(l));
  for (const char* stage : {"global_avg_pool", "embedding", "liquid", "readout"}) plan.stage_order.emplace_back(stage);
}

}  // namespace

ExecutionPlan compile(const QuantModel& q, const ChipSpec& chip) {
  chip.validate();
  const auto tally = neuron_synapse_tally(q.wiring);
  std::vector<std::size_t> neurons(chip.core_count, 0), synapses(chip.core_count, 0);
  ExecutionPlan plan;
  plan.neuron_core.resize(tally.size());
  for (std::size_t i = 0; i < tally.size(); ++i) {
    std::size_t best = chip.core_count;
    for (std::size_t c = 0; c < chip.core_count; ++c) {
      if (neurons[c] >= chip.neurons_per_core) continue;
      if (best == chip.core_count || synapses[c] < synapses[best]) best = c;
    }
    if (best == chip.core_count) {
      throw CompileError("neuron " + std::to_string(i) + ": every core is at neurons_per_core=" +
                         std::to_string(chip.neurons_per_core));
    }
    if (synapses[best] + tally[i] > chip.synapses_per_core) {
      throw CompileError("neuron " + std::to_string(i) + " needs " + std::to_string(tally[i]) +
                         " synapses; core " + std::to_string(best) + " would exceed synapses_per_core=" +
                         std::to_string(chip.synapses_per_core));
    }
    plan.neuron_core[i] = best;
    ++neurons[best];
    synapses[best] += tally[i];
  }
  fill_plan_tallies(plan, q, chip);
  return plan;
}

ExecutionPlan plan_from_assignment(const QuantModel& q, const ChipSpec& chip,
                                   std::vector<std::size_t> neuron_core) {
  chip.validate();
  if (neuron_core.size() != q.wiring.spec.liquid()) {
    throw CompileError("plan maps " + std::to_string(neuron_core.size()) + " neurons, model has " +
                       std::to_string(q.wiring.spec.liquid()));
  }
  ExecutionPlan plan;
  plan.neuron_core = std::move(neuron_core);
  fill_plan_tallies(plan, q, chip);
  return plan;
}

void write_plan(const ExecutionPlan& plan, std::ostream& out) {
  for (std::size_t i = 0; i < plan.neuron_core.size(); ++i) out << i << ' ' << plan.neuron_core[i] << '\n';
}

std::vector<std::size_t> read_plan_assignment(std::istream& in) {
  std::vector<std::size_t> mapping;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::size_t neuron = 0, core = 0;
    std::string extra;
    if (!(fields >> neuron >> core) || (fields >> extra)) {
      throw FormatError("plan line " + std::to_string(line_no) + ": expected 'neuron_index core_index'");
    }
    if (neuron != mapping.size()) {
      throw FormatError("plan line " + std::to_string(line_no) + ": neuron " + std::to_string(neuron) +
                        " out of order");
    }
    mapping.push_back(core);
  }
  return mapping;
}

namespace {

// Integer arithmetic helpers shared by one inference run.
class FixedArith {
 public:
  FixedArith(int bits, int frac)
      : hi_((std::int64_t{1} << (bits - 1)) - 1), lo_(-(std::int64_t{1} << (bits - 1))), frac_(frac) {}

  std::int32_t clamp(std::int64_t v) {
    if (v > hi_) {
      ++saturations;
      return static_cast<std::int32_t>(hi_);
    }
    if (v < lo_) {
      ++saturations;
      return static_cast<std::int32_t>(lo_);
    }
    return static_cast<std::int32_t>(v);
  }

  std::int64_t rescale(std::int64_t v) const {
    if (frac_ == 0) return v;
    const std::int64_t half = std::int64_t{1} << (frac_ - 1);
    return v >= 0 ? (v + half) >> frac_ : -((-v + half) >> frac_);
  }

  std::int32_t mul(std::int32_t a, std::int32_t b) {
    return clamp(rescale(static_cast<std::int64_t>(a) * b));
  }

  std::int64_t accumulate(std::int64_t acc, std::int64_t v) {
    std::int64_t out = 0;
    if (__builtin_add_overflow(acc, v, &out)) {
      ++saturations;
      return v > 0 ? std::numeric_limits<std::int64_t>::max() : std::numeric_limits<std::int64_t>::min();
    }
    return out;
  }

  std::int32_t div(std::int32_t num, std::int32_t den) {
    return clamp(div_round(static_cast<std::int64_t>(num) * (std::int64_t{1} << frac_), den));
  }

  static std::int64_t div_round(std::int64_t n, std::int64_t d) {
    if (d < 0) {
      n = -n;
      d = -d;
    }
    return n >= 0 ? (n + d / 2) / d : -((-n + d / 2) / d);
  }

  std::uint64_t saturations = 0;

 private:
  std::int64_t hi_, lo_;
  int frac_;
};

constexpr std::size_t kLutSize = 1024;

}  // namespace

std::int32_t FixedPointEngine::fixed(double v) const {
  const std::int64_t hi = (std::int64_t{1} << (bits_ - 1)) - 1;
  const std::int64_t code = round_half_away(std::ldexp(v, frac_));
  return static_cast<std::int32_t>(std::clamp(code, -hi - 1, hi));
}

double FixedPointEngine::to_real(std::int32_t v) const { return std::ldexp(static_cast<double>(v), -frac_); }

FixedPointEngine::FixedPointEngine(const ExecutionPlan& plan, const QuantModel& q)
    : plan_(plan), bits_(q.bits), frac_(q.frac_bits) {
  if (bits_ < 2 || bits_ > 32 || frac_ < 0 || frac_ >= bits_) {
    throw CompileError("quantized model has an unusable fixed-point format Q" +
                       std::to_string(bits_ - frac_) + "." + std::to_string(frac_));
  }
  const WiringSpec& ws = q.wiring.spec;
  n_liquid_ = ws.liquid();
  n_inputs_ = ws.n_sensory;
  n_motor_ = ws.n_motor;
  steps_ = q.steps_per_input;
  if (plan.neuron_core.size() != n_liquid_ || plan.core_neurons.empty()) {
    throw CompileError("malformed plan: maps " + std::to_string(plan.neuron_core.size()) +
                       " neurons, model has " + std::to_string(n_liquid_));
  }
  for (std::size_t core : plan.neuron_core) {
    if (core >= plan.core_neurons.size()) throw CompileError("malformed plan: core index out of range");
  }

  auto convert = [this](const QuantizedTensor& t) {
    std::vector<std::int32_t> out(t.data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fixed(t.value(i));
    return out;
  };
  for (std::size_t l = 0; l < q.conv.layers.size(); ++l) {
    const std::string prefix = "conv" + std::to_string(l);
    conv_.push_back({q.conv.layers[l], convert(q.tensor(prefix + ".kernels")), convert(q.tensor(prefix + ".bias"))});
  }

  dt_ = fixed(q.dt);
  const auto tau = convert(q.tensor("liquid.tau"));
  FixedArith arith(bits_, frac_);
  for (std::size_t i = 0; i < n_liquid_; ++i) {
    if (tau[i] <= 0) throw CompileError("liquid.tau[" + std::to_string(i) + "] is not positive in fixed point");
    leak_.push_back(arith.div(dt_, tau[i]));
  }

  in_ = {convert(q.tensor("liquid.w_in")), convert(q.tensor("liquid.gamma_in")),
         convert(q.tensor("liquid.mu_in")), convert(q.tensor("liquid.a_in"))};
  const auto w = convert(q.tensor("liquid.w_rec"));
  const auto gamma = convert(q.tensor("liquid.gamma_rec"));
  const auto mu = convert(q.tensor("liquid.mu_rec"));
  const auto a = convert(q.tensor("liquid.a_rec"));
  const std::size_t S = ws.n_sensory;
  for (std::size_t i = 0; i < n_liquid_; ++i) {
    rec_row_begin_.push_back(static_cast<std::uint32_t>(rec_pre_.size()));
    for (std::size_t j = 0; j < n_liquid_; ++j) {
      if (!q.wiring.has_edge(S + j, S + i)) continue;
      const std::size_t k = i * n_liquid_ + j;
      rec_pre_.push_back(static_cast<std::uint32_t>(j));
      rec_.w.push_back(w[k]);
      rec_.gamma.push_back(gamma[k]);
      rec_.mu.push_back(mu[k]);
      rec_.a.push_back(a[k]);
    }
  }
  rec_row_begin_.push_back(static_cast<std::uint32_t>(rec_pre_.size()));

  head_w_ = convert(q.tensor("head.w"));
  head_b_ = convert(q.tensor("head.b"));
  n_classes_ = head_b_.size();

  lut_.resize(kLutSize);
  for (std::size_t i = 0; i < kLutSize; ++i) {
    const double x = -8.0 + 16.0 * static_cast<double>(i) / static_cast<double>(kLutSize - 1);
    lut_[i] = fixed(1.0 / (1.0 + std::exp(-x)));
  }
}

std::int32_t FixedPointEngine::sigmoid_fixed(std::int64_t z) const {
  const std::int64_t lo = -(std::int64_t{8} << frac_);
  const std::int64_t span = std::int64_t{16} << frac_;
  if (z <= lo) return lut_.front();
  if (z >= lo + span) return lut_.back();
  const std::int64_t pos = (z - lo) * static_cast<std::int64_t>(kLutSize - 1);
  const std::int64_t idx = pos / span;
  const std::int64_t rem = pos % span;
  const std::int64_t y0 = lut_[static_cast<std::size_t>(idx)];
  const std::int64_t y1 = lut_[static_cast<std::size_t>(idx) + 1];
  return static_cast<std::int32_t>(y0 + FixedArith::div_round((y1 - y0) * rem, span));
}

FixedPointResult FixedPointEngine::run(const Tensor& image) const {
  if (image.rank() != 3) throw DimensionError("fixed-point input must be [C,H,W]");
  ConvSpec spec;
  for (const Conv& c : conv_) spec.layers.push_back(c.spec);
  spec.validate(image.shape());

  FixedArith ar(bits_, frac_);
  FixedPointResult result;
  ExecutionStats& st = result.stats;
  st.core_macs.assign(plan_.core_neurons.size(), 0);

  std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  std::vector<std::int32_t> act(image.size());
  for (std::size_t i = 0; i < act.size(); ++i) act[i] = fixed(image[i]);

  for (const Conv& layer : conv_) {
    const ConvLayerSpec& s = layer.spec;
    const std::size_t k = s.kernel, K = s.out_channels;
    const std::size_t Ho = conv_output_extent(H, k, s.stride, s.padding);
    const std::size_t Wo = conv_output_extent(W, k, s.stride, s.padding);
    std::vector<std::int32_t> out(K * Ho * Wo);
    for (std::size_t o = 0; o < K; ++o) {
      for (std::size_t y = 0; y < Ho; ++y) {
        for (std::size_t x = 0; x < Wo; ++x) {
          std::int64_t acc = static_cast<std::int64_t>(layer.bias[o]) * (std::int64_t{1} << frac_);
          for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t ky = 0; ky < k; ++ky) {
              const auto iy = static_cast<std::ptrdiff_t>(y * s.stride + ky) - static_cast<std::ptrdiff_t>(s.padding);
              for (std::size_t kx = 0; kx < k; ++kx) {
                const auto ix = static_cast<std::ptrdiff_t>(x * s.stride + kx) - static_cast<std::ptrdiff_t>(s.padding);
                const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(H) &&
                                    ix < static_cast<std::ptrdiff_t>(W);
                const std::int32_t v =
                    inside ? act[(c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)] : 0;
                acc = ar.accumulate(acc, static_cast<std::int64_t>(layer.kernels[((o * C + c) * k + ky) * k + kx]) * v);
                ++st.macs_frontend;
              }
            }
          }
          out[(o * Ho + y) * Wo + x] = std::max<std::int32_t>(0, ar.clamp(ar.rescale(acc)));
        }
      }
    }
    C = K;
    H = Ho;
    W = Wo;
    if (s.pool) {
      std::vector<std::int32_t> pooled(C * (H / 2) * (W / 2));
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t y = 0; y < H / 2; ++y) {
          for (std::size_t x = 0; x < W / 2; ++x) {
            std::int32_t m = out[(c * H + 2 * y) * W + 2 * x];
            for (std::size_t dy = 0; dy < 2; ++dy) {
              for (std::size_t dx = 0; dx < 2; ++dx) m = std::max(m, out[(c * H + 2 * y + dy) * W + 2 * x + dx]);
            }
            pooled[(c * (H / 2) + y) * (W / 2) + x] = m;
          }
        }
      }
      out = std::move(pooled);
      H /= 2;
      W /= 2;
    }
    act = std::move(out);
  }

  std::vector<std::int32_t> features(C);
  const auto area = static_cast<std::int64_t>(H * W);
  for (std::size_t c = 0; c < C; ++c) {
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < H * W; ++i) sum = ar.accumulate(sum, act[c * H * W + i]);
    features[c] = ar.clamp(FixedArith::div_round(sum, area));
  }
  if (features.size() != n_inputs_) throw DimensionError("feature width does not match the liquid input width");

  auto synapse = [&](std::int32_t w, std::int32_t gamma, std::int32_t mu, std::int32_t a, std::int32_t pre,
                     std::int64_t& s, std::int64_t& g) {
    const std::int32_t z = ar.clamp(static_cast<std::int64_t>(ar.mul(gamma, pre)) + mu);
    const std::int32_t f = ar.mul(w, sigmoid_fixed(z));
    s = ar.accumulate(s, f);
    g = ar.accumulate(g, ar.mul(f, a));
  };

  // Inputs are constant over the frame, so the input synapses run once.
  std::vector<std::int64_t> s_in(n_liquid_, 0), g_in(n_liquid_, 0);
  for (std::size_t i = 0; i < n_liquid_; ++i) {
    for (std::size_t kk = 0; kk < n_inputs_; ++kk) {
      const std::size_t e = i * n_inputs_ + kk;
      synapse(in_.w[e], in_.gamma[e], in_.mu[e], in_.a[e], features[kk], s_in[i], g_in[i]);
      ++st.macs_embedding;
      ++st.core_macs[plan_.neuron_core[i]];
    }
  }

  const std::int32_t one = ar.clamp(std::int64_t{1} << frac_);
  std::vector<std::int32_t> x(n_liquid_, 0), next(n_liquid_, 0);
  for (std::size_t step = 0; step < steps_; ++step) {
    for (std::size_t i = 0; i < n_liquid_; ++i) {
      std::int64_t s = s_in[i], g = g_in[i];
      for (std::uint32_t e = rec_row_begin_[i]; e < rec_row_begin_[i + 1]; ++e) {
        synapse(rec_.w[e], rec_.gamma[e], rec_.mu[e], rec_.a[e], x[rec_pre_[e]], s, g);
        ++st.macs_processing;
        ++st.core_macs[plan_.neuron_core[i]];
      }
      const std::int32_t num = ar.clamp(static_cast<std::int64_t>(x[i]) + ar.mul(dt_, ar.clamp(g)));
      const std::int32_t den =
          ar.clamp(static_cast<std::int64_t>(one) + leak_[i] + ar.mul(dt_, ar.clamp(s)));
      next[i] = ar.div(num, den);
    }
    x.swap(next);
  }

  const std::size_t motor0 = n_liquid_ - n_motor_;
  result.logits.resize(n_classes_);
  for (std::size_t c = 0; c < n_classes_; ++c) {
    std::int64_t acc = static_cast<std::int64_t>(head_b_[c]) * (std::int64_t{1} << frac_);
    for (std::size_t j = 0; j < n_motor_; ++j) {
      acc = ar.accumulate(acc, static_cast<std::int64_t>(head_w_[c * n_motor_ + j]) * x[motor0 + j]);
      ++st.macs_readout;
      ++st.core_macs[plan_.neuron_core[motor0 + j]];
    }
    result.logits[c] = ar.clamp(ar.rescale(acc));
  }
  st.macs_total = st.macs_frontend + st.macs_embedding + st.macs_processing + st.macs_readout;
  st.saturations = ar.saturations;
  return result;
}

FixedPointResult execute_fixed_point(const ExecutionPlan& plan, const QuantModel& qmodel,
                                     const Tensor& image) {
  return FixedPointEngine(plan, qmodel).run(image);
}

double estimate_energy(const ExecutionStats& stats, const ChipSpec& chip) {
  if (chip.energy_per_mac_joules < 0.0 || chip.static_joules_per_frame < 0.0) {
    throw ConfigError("energy constants must be non-negative");
  }
  return static_cast<double>(stats.macs_total) * chip.energy_per_mac_joules + chip.static_joules_per_frame;
}

std::string encode_golden(const std::vector<std::vector<std::int32_t>>& frames) {
  std::string out;
  for (const auto& frame : frames) {
    for (std::int32_t v : frame) {
      const auto u = static_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xffu));
    }
  }
  return out;
}

std::vector<std::int32_t> decode_golden(const std::string& bytes) {
  if (bytes.size() % 4 != 0) throw FormatError("golden file length is not a multiple of 4");
  std::vector<std::int32_t> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
    out[i] = static_cast<std::int32_t>(u);
  }
  return out;
}

}  // namespace lnn
