#include "lnn/config.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "lnn/atomic_file.hpp"
#include "lnn/error.hpp"

namespace lnn {
namespace {

struct Default {
  const char* key;
  const char* value;
};

constexpr Default kDefaults[] = {
    {"seed", "1"},
    {"data.train_files", ""},
    {"data.test_files", ""},
    {"data.classes", "0,1,2"},
    {"data.train_per_class", "300"},
    {"data.val_per_class", "50"},
    {"data.test_per_class", "100"},
    {"data.downscale", "2"},
    {"model.conv_channels", "8,16"},
    {"model.conv_kernel", "3"},
    {"model.conv_pool", "true"},
    {"model.dt", "0.1"},
    {"model.steps", "6"},
    {"model.init_tau", "0.5,2"},
    {"model.init_w", "0.01,0.3"},
    {"model.init_gamma", "0.5,1.5"},
    {"model.init_mu", "-0.3,0.3"},
    {"model.init_a", "0.5,1"},
    {"wiring.n_sensory", "16"},
    {"wiring.n_inter", "24"},
    {"wiring.n_command", "12"},
    {"wiring.n_motor", "10"},
    {"wiring.fanout_sensory", "4"},
    {"wiring.fanout_inter", "2"},
    {"wiring.recurrent_command", "6"},
    {"wiring.inhibitory_fraction", "0.3"},
    {"wiring.seed", "42"},
    {"train.epochs", "15"},
    {"train.batch_size", "32"},
    {"train.lr", "0.003"},
    {"train.beta1", "0.9"},
    {"train.beta2", "0.999"},
    {"train.eps", "1e-8"},
    {"train.threads", "1"},
    {"quant.calibration_samples", "64"},
    {"chip.core_count", "128"},
    {"chip.precision_bits", "32"},
    {"chip.frac_bits", "16"},
    {"chip.neurons_per_core", "64"},
    {"chip.synapses_per_core", "4096"},
    {"chip.energy_per_mac", "2.506e-13"},
    {"chip.static_per_frame", "0"},
    {"sim.samples", "16"},
    {"profile.samples", "100"},
    {"profile.power_watts", ""},
    {"report.reference", "data/reference_tables/literature.csv"},
    {"report.format", "md"},
    {"out.model", "out/model.lnnm"},
    {"out.qmodel", "out/model_q.lnnm"},
    {"out.plan", "out/plan.txt"},
    {"out.metrics", "out/metrics.csv"},
    {"out.readiness", "out/readiness.txt"},
    {"out.golden", "out/golden.bin"},
    {"out.cost", "out/cost_report.csv"},
    {"out.report", "out/comparison.md"},
    {"out.edges", "out/edges.txt"},
};

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool known(const std::string& key) {
  return std::any_of(std::begin(kDefaults), std::end(kDefaults), [&](const Default& d) { return key == d.key; });
}

}  // namespace

RunConfig::RunConfig() {
  for (const Default& d : kDefaults) values_[d.key] = d.value;
}

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const Default& d : kDefaults) k.emplace_back(d.key);
    return k;
  }();
  return keys;
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& source) {
  RunConfig c;
  c.merge_text(text, source);
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) { return from_text(read_file(path), path); }

void RunConfig::merge_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (!known(key)) throw ConfigError(source + ":" + std::to_string(line_no) + ": unknown config key '" + key + "'");
    values_[key] = trim(line.substr(eq + 1));
  }
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!known(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::real(const std::string& key) const {
  const std::string& v = get(key);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

std::optional<double> RunConfig::optional_real(const std::string& key) const {
  if (!has_value(key)) return std::nullopt;
  return real(key);
}

std::int64_t RunConfig::integer(const std::string& key) const {
  const std::string& v = get(key);
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

std::size_t RunConfig::count(const std::string& key) const {
  const std::int64_t v = integer(key);
  if (v < 0) throw ConfigError(key + ": expected a non-negative integer, got " + std::to_string(v));
  return static_cast<std::size_t>(v);
}

bool RunConfig::flag(const std::string& key) const {
  std::string v = get(key);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + get(key) + "'");
}

std::vector<std::string> RunConfig::list(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(get(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> RunConfig::count_list(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const std::string& item : list(key)) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || item.front() == '-') {
      throw ConfigError(key + ": expected non-negative integers, got '" + item + "'");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

void RunConfig::range_pair(const std::string& key, double& lo, double& hi) const {
  const std::vector<std::string> items = list(key);
  if (items.size() != 2) throw ConfigError(key + ": expected 'low, high', got '" + get(key) + "'");
  double v[2];
  for (int i = 0; i < 2; ++i) {
    std::size_t used = 0;
    try {
      v[i] = std::stod(items[static_cast<std::size_t>(i)], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != items[static_cast<std::size_t>(i)].size()) {
      throw ConfigError(key + ": expected a number, got '" + items[static_cast<std::size_t>(i)] + "'");
    }
  }
  lo = v[0];
  hi = v[1];
}

WiringSpec RunConfig::wiring_spec() const {
  WiringSpec s;
  s.n_sensory = count("wiring.n_sensory");
  s.n_inter = count("wiring.n_inter");
  s.n_command = count("wiring.n_command");
  s.n_motor = count("wiring.n_motor");
  s.fanout_sensory = count("wiring.fanout_sensory");
  s.fanout_inter = count("wiring.fanout_inter");
  s.recurrent_command = count("wiring.recurrent_command");
  s.inhibitory_fraction = real("wiring.inhibitory_fraction");
  s.seed = static_cast<std::uint64_t>(integer("wiring.seed"));
  return s;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.conv.layers.clear();
  std::size_t in = 3;
  const std::size_t kernel = count("model.conv_kernel");
  const bool pool = flag("model.conv_pool");
  for (std::size_t out : count_list("model.conv_channels")) {
    m.conv.layers.push_back({in, out, kernel, 1, kernel / 2, pool});
    in = out;
  }
  m.wiring = wiring_spec();
  m.dt = real("model.dt");
  m.steps_per_input = count("model.steps");
  m.n_classes = list("data.classes").size();
  m.init_seed = seed();
  range_pair("model.init_tau", m.liquid_init.tau_lo, m.liquid_init.tau_hi);
  range_pair("model.init_w", m.liquid_init.w_lo, m.liquid_init.w_hi);
  range_pair("model.init_gamma", m.liquid_init.gamma_lo, m.liquid_init.gamma_hi);
  range_pair("model.init_mu", m.liquid_init.mu_lo, m.liquid_init.mu_hi);
  range_pair("model.init_a", m.liquid_init.a_lo, m.liquid_init.a_hi);
  try {
    m.liquid_init.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("model.init_*: ") + e.what());
  }
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.epochs = count("train.epochs");
  t.batch_size = count("train.batch_size");
  t.adam.lr = real("train.lr");
  t.adam.beta1 = real("train.beta1");
  t.adam.beta2 = real("train.beta2");
  t.adam.eps = real("train.eps");
  t.threads = count("train.threads");
  t.seed = seed();
  t.checkpoint_path = get("out.model");
  t.log_path = get("out.metrics");
  return t;
}

ChipSpec RunConfig::chip_spec() const {
  ChipSpec c;
  c.core_count = count("chip.core_count");
  c.precision_bits = static_cast<int>(integer("chip.precision_bits"));
  c.frac_bits = static_cast<int>(integer("chip.frac_bits"));
  c.neurons_per_core = count("chip.neurons_per_core");
  c.synapses_per_core = count("chip.synapses_per_core");
  c.energy_per_mac_joules = real("chip.energy_per_mac");
  c.static_joules_per_frame = real("chip.static_per_frame");
  c.validate();
  return c;
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  for (const Default& d : kDefaults) out << d.key << " = " << values_.at(d.key) << '\n';
  return out.str();
}

}  // namespace lnn
