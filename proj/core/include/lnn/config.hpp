#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lnn/chip.hpp"
#include "lnn/model.hpp"
#include "lnn/trainer.hpp"

namespace lnn {

// Flat "key = value" configuration with dotted namespaces. Every key
// has a default, so a RunConfig is always complete; unknown keys are
// rejected wherever they appear. '#' starts a comment.
class RunConfig {
 public:
  RunConfig();

  static RunConfig from_file(const std::string& path);
  static RunConfig from_text(const std::string& text, const std::string& source = "<text>");

  void merge_text(const std::string& text, const std::string& source);
  // "key=value"; throws ConfigError on a missing '=' or an unknown key.
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  bool has_value(const std::string& key) const { return !get(key).empty(); }
  double real(const std::string& key) const;
  std::optional<double> optional_real(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  bool flag(const std::string& key) const;
  // Comma-separated, whitespace-trimmed, empty items dropped.
  std::vector<std::string> list(const std::string& key) const;
  std::vector<std::size_t> count_list(const std::string& key) const;
  void range_pair(const std::string& key, double& lo, double& hi) const;

  std::uint64_t seed() const { return static_cast<std::uint64_t>(integer("seed")); }
  WiringSpec wiring_spec() const;
  ModelConfig model_config() const;
  TrainConfig train_config() const;
  ChipSpec chip_spec() const;

  static const std::vector<std::string>& known_keys();
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace lnn
