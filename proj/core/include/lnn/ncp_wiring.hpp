#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lnn/tensor.hpp"

namespace lnn {

// Layer sizes and sampling parameters for a Neural Circuit Policy wiring.
struct WiringSpec {
  std::size_t n_sensory = 16;
  std::size_t n_inter = 24;
  std::size_t n_command = 12;
  std::size_t n_motor = 10;
  std::size_t fanout_sensory = 4;
  std::size_t fanout_inter = 2;
  std::size_t recurrent_command = 6;
  double inhibitory_fraction = 0.3;
  std::uint64_t seed = 42;

  std::size_t total() const { return n_sensory + n_inter + n_command + n_motor; }
  std::size_t liquid() const { return n_inter + n_command + n_motor; }
  // Command neurons each motor neuron listens to.
  std::size_t motor_fanin() const { return n_command < 3 ? n_command : 3; }

  friend bool operator==(const WiringSpec&, const WiringSpec&) = default;
};

enum class NeuronRole : std::uint8_t { kSensory = 0, kInter = 1, kCommand = 2, kMotor = 3 };

const char* role_name(NeuronRole role);

// Sparse connectivity over all neurons, indexed sensory, inter, command,
// motor in that order. Edge (src, dst) lives at src * n + dst.
struct Wiring {
  WiringSpec spec;
  std::size_t n = 0;
  std::vector<std::uint8_t> adjacency;
  std::vector<std::int8_t> polarity;  // +1/-1 on edges, 0 elsewhere
  std::vector<NeuronRole> roles;

  bool has_edge(std::size_t src, std::size_t dst) const { return adjacency[src * n + dst] != 0; }
  std::int8_t sign(std::size_t src, std::size_t dst) const { return polarity[src * n + dst]; }
  std::size_t edge_count() const;
  std::size_t liquid_edge_count() const;  // edges whose source is not sensory
  std::size_t input_edge_count() const;   // sensory -> inter edges

  std::size_t first_liquid() const { return spec.n_sensory; }
  std::size_t first_motor() const { return n - spec.n_motor; }

  friend bool operator==(const Wiring&, const Wiring&) = default;
};

Wiring build_ncp(const WiringSpec& spec);

enum class ViolationKind {
  kSelfLoop,
  kForbiddenLayerPair,
  kPolarityDomain,
  kSensoryNoOutput,
  kMotorNoInput,
  kDegreeMismatch,
  kUnreachableMotor,
  kShape,
};

struct Violation {
  ViolationKind kind;
  std::size_t neuron;  // index of the offending neuron (source for edges)
  std::string message;
};

const char* violation_name(ViolationKind kind);

// Empty result means the wiring satisfies every structural invariant.
std::vector<Violation> validate(const Wiring& wiring);

// Liquid-cell masks. Liquid neuron i is global neuron n_sensory + i; input
// channel k is sensory neuron k. Entry (post, pre) is set for an edge
// pre -> post.
struct WiringMasks {
  Tensor mask_rec;  // [L, L]
  Tensor mask_in;   // [L, S]
  Tensor sign_rec;  // +-1 on masked entries, 0 elsewhere
  Tensor sign_in;
};

WiringMasks masks(const Wiring& wiring);

// Edge list with one "src dst polarity" line per edge, src-major order.
void write_edge_list(const Wiring& wiring, std::ostream& out);

}  // namespace lnn
