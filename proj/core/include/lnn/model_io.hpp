#pragma once

#include <cstdint>
#include <string>

#include "lnn/model.hpp"
#include "lnn/quantize.hpp"

namespace lnn {

// "LNNM" file layout, all numbers little-endian:
//   magic "LNNM", u8 version (1), u8 kind (0 float, 1 quantized),
//   then named sections in fixed order: meta, wiring, conv, liquid, head,
//   and for quantized models scales. Each section is
//   u8 name length, name bytes, u64 payload length, payload.
// Reals are IEEE-754 binary64, so a load after a save is bit-exact.
inline constexpr std::uint8_t kModelFormatVersion = 1;

enum class ModelKind : std::uint8_t { kFloat = 0, kQuantized = 1 };

std::string encode_model(const Model& model);
std::string encode_model(const QuantModel& qmodel);
Model decode_model(const std::string& bytes);
QuantModel decode_quant_model(const std::string& bytes);
// Validates the magic and version only. Throws FormatError.
ModelKind model_kind(const std::string& bytes);

// Atomic writes. Loads throw IoError when the file cannot be read and
// FormatError for bad magic, unsupported versions, wrong kinds, truncation
// or trailing bytes.
void save_model(const Model& model, const std::string& path);
void save_model(const QuantModel& qmodel, const std::string& path);
Model load_model(const std::string& path);
QuantModel load_quant_model(const std::string& path);

}  // namespace lnn
