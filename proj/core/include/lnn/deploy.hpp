#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lnn/chip.hpp"
#include "lnn/model.hpp"
#include "lnn/quantize.hpp"

namespace lnn {

struct ReadinessItem {
  std::string name;
  bool pass = true;
  std::string measured;
  std::string limit;
};

struct ReadinessReport {
  std::vector<ReadinessItem> items;

  bool pass() const;
  std::string to_text() const;
};

// Parameter finiteness, wiring validity, chip spec sanity and neuron /
// synapse capacity. Failures are report items, never exceptions.
ReadinessReport readiness_check(const Model& model, const ChipSpec& chip);

// Synapses stored per liquid neuron: one dense input row (n_sensory
// weights) plus its recurrent in-degree.
std::vector<std::size_t> neuron_synapse_tally(const Wiring& wiring);

struct ExecutionPlan {
  std::vector<std::size_t> neuron_core;  // liquid neuron -> core
  std::vector<std::size_t> core_neurons;
  std::vector<std::size_t> core_synapses;
  std::vector<std::string> stage_order;

  friend bool operator==(const ExecutionPlan&, const ExecutionPlan&) = default;
};

// Greedy balance: each liquid neuron, in index order, goes to the core
// (with neuron room) holding the fewest synapses; ties go to the lowest
// core index. Throws CompileError when a capacity would be exceeded.
ExecutionPlan compile(const QuantModel& qmodel, const ChipSpec& chip);

// Rebuilds and checks a plan from an explicit neuron -> core mapping.
ExecutionPlan plan_from_assignment(const QuantModel& qmodel, const ChipSpec& chip,
                                   std::vector<std::size_t> neuron_core);

// One "neuron_index core_index" line per liquid neuron.
void write_plan(const ExecutionPlan& plan, std::ostream& out);
std::vector<std::size_t> read_plan_assignment(std::istream& in);

struct ExecutionStats {
  std::uint64_t macs_frontend = 0;
  std::uint64_t macs_embedding = 0;
  std::uint64_t macs_processing = 0;
  std::uint64_t macs_readout = 0;
  std::uint64_t macs_total = 0;
  std::vector<std::uint64_t> core_macs;  // liquid + readout work per core
  std::uint64_t saturations = 0;
};

struct FixedPointResult {
  std::vector<std::int32_t> logits;  // fixed point with qmodel.frac_bits
  ExecutionStats stats;
};

// Integer-only inference. Products go to 64-bit accumulators and are
// rescaled by an arithmetic shift of frac_bits with round-half-away;
// results saturate to the qmodel's bit width. The sigmoid is a 1024-entry
// table over [-8, 8] with linear interpolation, clamped outside.
class FixedPointEngine {
 public:
  FixedPointEngine(const ExecutionPlan& plan, const QuantModel& qmodel);

  FixedPointResult run(const Tensor& image) const;
  double to_real(std::int32_t v) const;
  std::int32_t sigmoid_fixed(std::int64_t z) const;
  int frac_bits() const { return frac_; }

 private:
  struct Conv {
    ConvLayerSpec spec;
    std::vector<std::int32_t> kernels;
    std::vector<std::int32_t> bias;
  };
  struct Synapses {
    std::vector<std::int32_t> w, gamma, mu, a;
  };

  std::int32_t fixed(double v) const;

  ExecutionPlan plan_;
  int bits_ = 32;
  int frac_ = 16;
  std::size_t n_liquid_ = 0;
  std::size_t n_inputs_ = 0;
  std::size_t n_motor_ = 0;
  std::size_t n_classes_ = 0;
  std::size_t steps_ = 0;
  std::vector<Conv> conv_;
  std::vector<std::int32_t> leak_;  // dt / tau per neuron
  std::int32_t dt_ = 0;
  Synapses in_;   // dense [L, D]
  Synapses rec_;  // sparse, row-major by post neuron
  std::vector<std::uint32_t> rec_pre_;
  std::vector<std::uint32_t> rec_row_begin_;
  std::vector<std::int32_t> head_w_, head_b_;
  std::vector<std::int32_t> lut_;
};

FixedPointResult execute_fixed_point(const ExecutionPlan& plan, const QuantModel& qmodel,
                                     const Tensor& image);

// stats.macs_total * e_mac + static energy. Throws ConfigError on negative
// constants.
double estimate_energy(const ExecutionStats& stats, const ChipSpec& chip);

// Little-endian int32 logits, concatenated in class order per frame.
std::string encode_golden(const std::vector<std::vector<std::int32_t>>& frames);
std::vector<std::int32_t> decode_golden(const std::string& bytes);

}  // namespace lnn
