#include "lnn/ncp_wiring.hpp"

#include <deque>
#include <ostream>

#include "lnn/error.hpp"
#include "lnn/rng.hpp"

namespace lnn {

const char* role_name(NeuronRole role) {
  switch (role) {
    case NeuronRole::kSensory: return "sensory";
    case NeuronRole::kInter: return "inter";
    case NeuronRole::kCommand: return "command";
    case NeuronRole::kMotor: return "motor";
  }
  return "?";
}

const char* violation_name(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kSelfLoop: return "self-loop";
    case ViolationKind::kForbiddenLayerPair: return "forbidden-layer-pair";
    case ViolationKind::kPolarityDomain: return "polarity-domain";
    case ViolationKind::kSensoryNoOutput: return "sensory-no-output";
    case ViolationKind::kMotorNoInput: return "motor-no-input";
    case ViolationKind::kDegreeMismatch: return "degree-mismatch";
    case ViolationKind::kUnreachableMotor: return "unreachable-motor";
    case ViolationKind::kShape: return "shape";
  }
  return "?";
}

std::size_t Wiring::edge_count() const {
  std::size_t count = 0;
  for (auto e : adjacency) count += e != 0;
  return count;
}

std::size_t Wiring::input_edge_count() const {
  std::size_t count = 0;
  for (std::size_t s = 0; s < spec.n_sensory; ++s) {
    for (std::size_t d = 0; d < n; ++d) count += has_edge(s, d);
  }
  return count;
}

std::size_t Wiring::liquid_edge_count() const { return edge_count() - input_edge_count(); }

namespace {

void check_spec(const WiringSpec& spec) {
  auto fail = [](const std::string& what) { throw SpecError("unsatisfiable wiring spec: " + what); };
  if (spec.n_sensory == 0) fail("n_sensory must be positive");
  if (spec.n_inter == 0) fail("n_inter must be positive");
  if (spec.n_command == 0) fail("n_command must be positive");
  if (spec.n_motor == 0) fail("n_motor must be positive");
  if (spec.fanout_sensory == 0) fail("fanout_sensory must be positive");
  if (spec.fanout_inter == 0) fail("fanout_inter must be positive");
  if (spec.fanout_sensory > spec.n_inter) {
    fail("fanout_sensory (" + std::to_string(spec.fanout_sensory) + ") > n_inter (" +
         std::to_string(spec.n_inter) + ")");
  }
  if (spec.fanout_inter > spec.n_command) {
    fail("fanout_inter (" + std::to_string(spec.fanout_inter) + ") > n_command (" +
         std::to_string(spec.n_command) + ")");
  }
  const std::size_t pairs = spec.n_command * (spec.n_command - 1);
  if (spec.recurrent_command > pairs) {
    fail("recurrent_command (" + std::to_string(spec.recurrent_command) +
         ") > available command pairs (" + std::to_string(pairs) + ")");
  }
  if (!(spec.inhibitory_fraction >= 0.0 && spec.inhibitory_fraction <= 1.0)) {
    fail("inhibitory_fraction must lie in [0, 1]");
  }
}

std::vector<bool> reachable_from_sensory(const Wiring& w) {
  std::vector<bool> seen(w.n, false);
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < w.spec.n_sensory && s < w.n; ++s) {
    seen[s] = true;
    queue.push_back(s);
  }
  while (!queue.empty()) {
    const std::size_t src = queue.front();
    queue.pop_front();
    for (std::size_t dst = 0; dst < w.n; ++dst) {
      if (w.has_edge(src, dst) && !seen[dst]) {
        seen[dst] = true;
        queue.push_back(dst);
      }
    }
  }
  return seen;
}

bool allowed_pair(NeuronRole src, NeuronRole dst) {
  return (src == NeuronRole::kSensory && dst == NeuronRole::kInter) ||
         (src == NeuronRole::kInter && dst == NeuronRole::kCommand) ||
         (src == NeuronRole::kCommand && dst == NeuronRole::kCommand) ||
         (src == NeuronRole::kCommand && dst == NeuronRole::kMotor);
}

}  // namespace

Wiring build_ncp(const WiringSpec& spec) {
  check_spec(spec);

  Wiring w;
  w.spec = spec;
  w.n = spec.total();
  w.adjacency.assign(w.n * w.n, 0);
  w.polarity.assign(w.n * w.n, 0);
  w.roles.reserve(w.n);
  w.roles.insert(w.roles.end(), spec.n_sensory, NeuronRole::kSensory);
  w.roles.insert(w.roles.end(), spec.n_inter, NeuronRole::kInter);
  w.roles.insert(w.roles.end(), spec.n_command, NeuronRole::kCommand);
  w.roles.insert(w.roles.end(), spec.n_motor, NeuronRole::kMotor);

  const std::size_t inter0 = spec.n_sensory;
  const std::size_t command0 = inter0 + spec.n_inter;
  const std::size_t motor0 = command0 + spec.n_command;

  Rng rng(spec.seed);
  auto connect = [&](std::size_t src, std::size_t dst) {
    w.adjacency[src * w.n + dst] = 1;
    w.polarity[src * w.n + dst] = rng.uniform() < spec.inhibitory_fraction ? -1 : 1;
  };

  for (std::size_t s = 0; s < spec.n_sensory; ++s) {
    for (std::size_t t : rng.sample_without_replacement(spec.n_inter, spec.fanout_sensory)) {
      connect(s, inter0 + t);
    }
  }
  for (std::size_t i = 0; i < spec.n_inter; ++i) {
    for (std::size_t t : rng.sample_without_replacement(spec.n_command, spec.fanout_inter)) {
      connect(inter0 + i, command0 + t);
    }
  }
  // Ordered command pairs (a, b), a != b, enumerated a-major.
  if (spec.recurrent_command > 0) {
    const std::size_t nc = spec.n_command;
    for (std::size_t p : rng.sample_without_replacement(nc * (nc - 1), spec.recurrent_command)) {
      const std::size_t a = p / (nc - 1);
      std::size_t b = p % (nc - 1);
      if (b >= a) ++b;
      connect(command0 + a, command0 + b);
    }
  }

  const std::vector<bool> reach = reachable_from_sensory(w);
  std::vector<std::size_t> reachable_commands;
  for (std::size_t c = 0; c < spec.n_command; ++c) {
    if (reach[command0 + c]) reachable_commands.push_back(c);
  }
  for (std::size_t m = 0; m < spec.n_motor; ++m) {
    auto sources = rng.sample_without_replacement(spec.n_command, spec.motor_fanin());
    bool any_reachable = false;
    for (std::size_t c : sources) any_reachable = any_reachable || reach[command0 + c];
    // Keeps every motor neuron reachable; the replacement cannot duplicate
    // a chosen source because none of them was reachable.
    if (!any_reachable) {
      sources.back() = reachable_commands[rng.below(reachable_commands.size())];
    }
    for (std::size_t c : sources) connect(command0 + c, motor0 + m);
  }
  return w;
}

std::vector<Violation> validate(const Wiring& w) {
  std::vector<Violation> out;
  const WiringSpec& spec = w.spec;
  if (w.n != spec.total() || w.adjacency.size() != w.n * w.n ||
      w.polarity.size() != w.n * w.n || w.roles.size() != w.n) {
    out.push_back({ViolationKind::kShape, 0, "wiring arrays do not match layer sizes"});
    return out;
  }

  std::vector<std::size_t> out_deg(w.n, 0), in_deg(w.n, 0);
  std::size_t command_recurrent = 0;
  for (std::size_t src = 0; src < w.n; ++src) {
    for (std::size_t dst = 0; dst < w.n; ++dst) {
      const std::size_t idx = src * w.n + dst;
      if (!w.adjacency[idx]) {
        if (w.polarity[idx] != 0) {
          out.push_back({ViolationKind::kPolarityDomain, src,
                         "non-zero polarity without edge " + std::to_string(src) + "->" +
                             std::to_string(dst)});
        }
        continue;
      }
      if (src == dst) {
        out.push_back({ViolationKind::kSelfLoop, src,
                       "self-loop on neuron " + std::to_string(src)});
        continue;
      }
      if (w.polarity[idx] != 1 && w.polarity[idx] != -1) {
        out.push_back({ViolationKind::kPolarityDomain, src,
                       "edge " + std::to_string(src) + "->" + std::to_string(dst) +
                           " has polarity outside {-1,+1}"});
      }
      if (!allowed_pair(w.roles[src], w.roles[dst])) {
        out.push_back({ViolationKind::kForbiddenLayerPair, src,
                       std::string("edge ") + std::to_string(src) + "->" + std::to_string(dst) +
                           " connects " + role_name(w.roles[src]) + " to " +
                           role_name(w.roles[dst])});
        continue;
      }
      ++out_deg[src];
      ++in_deg[dst];
      if (w.roles[src] == NeuronRole::kCommand && w.roles[dst] == NeuronRole::kCommand) {
        ++command_recurrent;
      }
    }
  }

  const std::vector<bool> reach = reachable_from_sensory(w);
  for (std::size_t i = 0; i < w.n; ++i) {
    const std::string id = std::to_string(i);
    switch (w.roles[i]) {
      case NeuronRole::kSensory:
        if (out_deg[i] == 0) {
          out.push_back({ViolationKind::kSensoryNoOutput, i, "sensory neuron " + id + " has no outgoing edge"});
        } else if (out_deg[i] != spec.fanout_sensory) {
          out.push_back({ViolationKind::kDegreeMismatch, i,
                         "sensory neuron " + id + " out-degree " + std::to_string(out_deg[i]) +
                             " != fanout " + std::to_string(spec.fanout_sensory)});
        }
        break;
      case NeuronRole::kInter:
        if (out_deg[i] != spec.fanout_inter) {
          out.push_back({ViolationKind::kDegreeMismatch, i,
                         "inter neuron " + id + " out-degree " + std::to_string(out_deg[i]) +
                             " != fanout " + std::to_string(spec.fanout_inter)});
        }
        break;
      case NeuronRole::kCommand:
        break;
      case NeuronRole::kMotor:
        if (in_deg[i] == 0) {
          out.push_back({ViolationKind::kMotorNoInput, i, "motor neuron " + id + " has no incoming edge"});
        } else if (in_deg[i] != spec.motor_fanin()) {
          out.push_back({ViolationKind::kDegreeMismatch, i,
                         "motor neuron " + id + " in-degree " + std::to_string(in_deg[i]) +
                             " != " + std::to_string(spec.motor_fanin())});
        }
        if (!reach[i]) {
          out.push_back({ViolationKind::kUnreachableMotor, i,
                         "motor neuron " + id + " unreachable from sensory layer"});
        }
        break;
    }
  }
  if (command_recurrent != spec.recurrent_command) {
    out.push_back({ViolationKind::kDegreeMismatch, spec.n_sensory + spec.n_inter,
                   "command recurrent edges " + std::to_string(command_recurrent) +
                       " != " + std::to_string(spec.recurrent_command)});
  }
  return out;
}

WiringMasks masks(const Wiring& w) {
  const auto violations = validate(w);
  if (!violations.empty()) {
    throw ValidationError("invalid wiring: " + violations.front().message +
                          (violations.size() > 1
                               ? " (+" + std::to_string(violations.size() - 1) + " more)"
                               : ""));
  }
  const std::size_t S = w.spec.n_sensory;
  const std::size_t L = w.spec.liquid();
  WiringMasks m{Tensor({L, L}), Tensor({L, S}), Tensor({L, L}), Tensor({L, S})};
  for (std::size_t src = 0; src < w.n; ++src) {
    for (std::size_t dst = S; dst < w.n; ++dst) {
      if (!w.has_edge(src, dst)) continue;
      const double sign = w.sign(src, dst);
      if (src < S) {
        m.mask_in(dst - S, src) = 1.0;
        m.sign_in(dst - S, src) = sign;
      } else {
        m.mask_rec(dst - S, src - S) = 1.0;
        m.sign_rec(dst - S, src - S) = sign;
      }
    }
  }
  return m;
}

void write_edge_list(const Wiring& w, std::ostream& out) {
  for (std::size_t src = 0; src < w.n; ++src) {
    for (std::size_t dst = 0; dst < w.n; ++dst) {
      if (w.has_edge(src, dst)) {
        out << src << ' ' << dst << ' ' << static_cast<int>(w.sign(src, dst)) << '\n';
      }
    }
  }
}

}  // namespace lnn
