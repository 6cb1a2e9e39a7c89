#pragma once

#include <cstddef>

namespace lnn {

// Simulated neuromorphic target. Defaults: 128 cores with 32-bit fixed
// point, read as Q16.16. The per-core capacities are engineering choices
// that make the readiness checks meaningful; e_mac is calibrated so that a
// 0.85 GMAC frame costs 213 uJ.
struct ChipSpec {
  std::size_t core_count = 128;
  int precision_bits = 32;
  int frac_bits = 16;
  std::size_t neurons_per_core = 64;
  std::size_t synapses_per_core = 4096;
  double energy_per_mac_joules = 2.506e-13;
  double static_joules_per_frame = 0.0;

  // Throws ConfigError.
  void validate() const;
};

}  // namespace lnn
