#include "lnn/model_io.hpp"

#include <bit>
#include <cstring>

#include "lnn/atomic_file.hpp"
#include "lnn/error.hpp"

namespace lnn {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) u8(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void i32(std::int32_t v) {
    const auto u = static_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) u8(static_cast<std::uint8_t>(u >> (8 * b)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    out_.append(s);
  }
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void shape(const Shape& s) {
    u64(s.size());
    for (std::size_t d : s) u64(d);
  }
  void tensor(const std::string& name, const Tensor& t) {
    str(name);
    shape(t.shape());
    for (double v : t.values()) f64(v);
  }
  void qtensor(const std::string& name, const QuantizedTensor& t) {
    str(name);
    shape(t.shape);
    f64(t.scale);
    i32(t.bits);
    for (std::int32_t v : t.data) i32(v);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t begin, std::size_t end, std::string where)
      : data_(bytes), pos_(begin), end_(end), where_(std::move(where)) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_ + b])) << (8 * b);
    pos_ += 8;
    return v;
  }
  std::int32_t i32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_ + b])) << (8 * b);
    pos_ += 4;
    return static_cast<std::int32_t>(v);
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t size() {
    const std::uint64_t v = u64();
    if (v > end_ - pos_ && v > (std::uint64_t{1} << 40)) fail("implausible length " + std::to_string(v));
    return static_cast<std::size_t>(v);
  }
  std::string str() {
    const std::size_t n = size();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Shape shape() {
    const std::size_t rank = size();
    if (rank > 8) fail("tensor rank " + std::to_string(rank) + " is not supported");
    Shape s(rank);
    for (auto& d : s) d = size();
    return s;
  }
  void expect_name(const std::string& expected) {
    const std::string got = str();
    if (got != expected) fail("expected tensor '" + expected + "', found '" + got + "'");
  }
  Tensor tensor(const std::string& name) {
    expect_name(name);
    const Shape s = shape();
    const std::size_t n = shape_size(s);
    need(n * 8);
    std::vector<double> values(n);
    for (auto& v : values) v = f64();
    return Tensor(s, std::move(values));
  }
  NamedQuantizedTensor qtensor() {
    NamedQuantizedTensor out;
    out.name = str();
    out.tensor.shape = shape();
    out.tensor.scale = f64();
    out.tensor.bits = i32();
    const std::size_t n = shape_size(out.tensor.shape);
    need(n * 4);
    out.tensor.data.resize(n);
    for (auto& v : out.tensor.data) v = i32();
    return out;
  }
  void finish() {
    if (pos_ != end_) fail(std::to_string(end_ - pos_) + " unexpected trailing bytes");
  }
  std::size_t position() const { return pos_; }

  [[noreturn]] void fail(const std::string& what) const { throw FormatError(where_ + ": " + what); }

 private:
  void need(std::size_t n) const {
    if (n > end_ - pos_) fail("truncated (needed " + std::to_string(n) + " bytes, " + std::to_string(end_ - pos_) + " left)");
  }

  const std::string& data_;
  std::size_t pos_;
  std::size_t end_;
  std::string where_;
};

constexpr char kMagic[4] = {'L', 'N', 'N', 'M'};

void begin_file(std::string& out, ModelKind kind) {
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(kModelFormatVersion));
  out.push_back(static_cast<char>(kind));
}

void add_section(std::string& out, const std::string& name, std::string payload) {
  out.push_back(static_cast<char>(name.size()));
  out.append(name);
  Writer w;
  w.u64(payload.size());
  out.append(w.take());
  out.append(payload);
}

std::string wiring_payload(const Wiring& wiring) {
  Writer w;
  const WiringSpec& s = wiring.spec;
  for (std::size_t v : {s.n_sensory, s.n_inter, s.n_command, s.n_motor, s.fanout_sensory, s.fanout_inter,
                        s.recurrent_command}) {
    w.u64(v);
  }
  w.f64(s.inhibitory_fraction);
  w.u64(s.seed);
  w.u64(wiring.n);
  w.bytes(wiring.adjacency.data(), wiring.adjacency.size());
  w.bytes(wiring.polarity.data(), wiring.polarity.size());
  for (NeuronRole r : wiring.roles) w.u8(static_cast<std::uint8_t>(r));
  return w.take();
}

void conv_spec_into(Writer& w, const ConvSpec& spec) {
  w.u64(spec.layers.size());
  for (const ConvLayerSpec& l : spec.layers) {
    for (std::size_t v : {l.in_channels, l.out_channels, l.kernel, l.stride, l.padding}) w.u64(v);
    w.u8(l.pool ? 1 : 0);
  }
}

// The section headers after the 6-byte preamble, checked in order.
class SectionCursor {
 public:
  explicit SectionCursor(const std::string& bytes) : bytes_(bytes), pos_(6) {}

  Reader open(const std::string& expected) {
    Reader head(bytes_, pos_, bytes_.size(), "model file");
    const std::size_t name_len = head.u8();
    const std::string name = head.raw(name_len);
    if (name != expected) head.fail("expected section '" + expected + "', found '" + name + "'");
    const std::uint64_t len = head.u64();
    const std::size_t begin = head.position();
    if (len > bytes_.size() - begin) {
      throw FormatError("model file: section '" + expected + "' truncated (declares " + std::to_string(len) +
                        " bytes, " + std::to_string(bytes_.size() - begin) + " present)");
    }
    pos_ = begin + static_cast<std::size_t>(len);
    return Reader(bytes_, begin, pos_, "section '" + expected + "'");
  }

  void finish() const {
    if (pos_ != bytes_.size()) {
      throw FormatError("model file: " + std::to_string(bytes_.size() - pos_) + " unexpected trailing bytes");
    }
  }

 private:
  const std::string& bytes_;
  std::size_t pos_;
};

Wiring read_wiring(Reader r) {
  Wiring w;
  WiringSpec& s = w.spec;
  for (std::size_t* v : {&s.n_sensory, &s.n_inter, &s.n_command, &s.n_motor, &s.fanout_sensory, &s.fanout_inter,
                         &s.recurrent_command}) {
    *v = r.size();
  }
  s.inhibitory_fraction = r.f64();
  s.seed = r.u64();
  w.n = r.size();
  if (w.n != s.total()) r.fail("neuron count does not match the layer sizes");
  const std::string adj = r.raw(w.n * w.n);
  const std::string pol = r.raw(w.n * w.n);
  w.adjacency.resize(w.n * w.n);
  w.polarity.resize(w.n * w.n);
  std::memcpy(w.adjacency.data(), adj.data(), adj.size());
  std::memcpy(w.polarity.data(), pol.data(), pol.size());
  w.roles.resize(w.n);
  for (auto& role : w.roles) {
    const std::uint8_t v = r.u8();
    if (v > 3) r.fail("bad neuron role " + std::to_string(v));
    role = static_cast<NeuronRole>(v);
  }
  r.finish();
  return w;
}

ConvSpec read_conv_spec(Reader& r) {
  ConvSpec spec;
  const std::size_t n = r.size();
  if (n > 64) r.fail("implausible conv layer count " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i) {
    ConvLayerSpec l;
    for (std::size_t* v : {&l.in_channels, &l.out_channels, &l.kernel, &l.stride, &l.padding}) *v = r.size();
    l.pool = r.u8() != 0;
    spec.layers.push_back(l);
  }
  return spec;
}

constexpr const char* kLiquidNames[] = {"tau",      "w_rec",    "gamma_rec", "mu_rec", "a_rec", "mask_rec",
                                        "w_in",     "gamma_in", "mu_in",     "a_in",   "mask_in"};

std::vector<Tensor*> liquid_slots(LiquidCellParams& p) {
  return {&p.tau, &p.w_rec, &p.gamma_rec, &p.mu_rec, &p.a_rec, &p.mask_rec,
          &p.w_in, &p.gamma_in, &p.mu_in, &p.a_in, &p.mask_in};
}

std::vector<const Tensor*> liquid_slots(const LiquidCellParams& p) {
  return {&p.tau, &p.w_rec, &p.gamma_rec, &p.mu_rec, &p.a_rec, &p.mask_rec,
          &p.w_in, &p.gamma_in, &p.mu_in, &p.a_in, &p.mask_in};
}

void check_preamble(const std::string& bytes, ModelKind expected) {
  const ModelKind kind = model_kind(bytes);
  if (kind != expected) {
    throw FormatError(std::string("model file holds a ") + (kind == ModelKind::kFloat ? "float" : "quantized") +
                      " model, expected a " + (expected == ModelKind::kFloat ? "float" : "quantized") + " one");
  }
}

}  // namespace

ModelKind model_kind(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("model file: bad magic (expected \"LNNM\")");
  }
  if (bytes.size() < 6) throw FormatError("model file: truncated header");
  const auto version = static_cast<std::uint8_t>(bytes[4]);
  if (version != kModelFormatVersion) {
    throw FormatError("model file: unsupported version " + std::to_string(version) + " (supported: " +
                      std::to_string(kModelFormatVersion) + ")");
  }
  const auto kind = static_cast<std::uint8_t>(bytes[5]);
  if (kind > 1) throw FormatError("model file: unknown model kind " + std::to_string(kind));
  return static_cast<ModelKind>(kind);
}

std::string encode_model(const Model& model) {
  std::string out;
  begin_file(out, ModelKind::kFloat);
  {
    Writer w;
    w.f64(model.dt);
    w.u64(model.steps_per_input);
    add_section(out, "meta", w.take());
  }
  add_section(out, "wiring", wiring_payload(model.wiring));
  {
    Writer w;
    conv_spec_into(w, model.conv);
    for (std::size_t l = 0; l < model.conv_params.size(); ++l) {
      w.tensor("kernels", model.conv_params[l].kernels);
      w.tensor("bias", model.conv_params[l].bias);
    }
    add_section(out, "conv", w.take());
  }
  {
    Writer w;
    const auto slots = liquid_slots(model.liquid);
    for (std::size_t i = 0; i < slots.size(); ++i) w.tensor(kLiquidNames[i], *slots[i]);
    add_section(out, "liquid", w.take());
  }
  {
    Writer w;
    w.tensor("w", model.head_w);
    w.tensor("b", model.head_b);
    add_section(out, "head", w.take());
  }
  return out;
}

Model decode_model(const std::string& bytes) {
  check_preamble(bytes, ModelKind::kFloat);
  SectionCursor sections(bytes);
  Model m;
  {
    Reader r = sections.open("meta");
    m.dt = r.f64();
    m.steps_per_input = r.size();
    r.finish();
  }
  m.wiring = read_wiring(sections.open("wiring"));
  {
    Reader r = sections.open("conv");
    m.conv = read_conv_spec(r);
    for (std::size_t l = 0; l < m.conv.layers.size(); ++l) {
      ConvLayerParams p;
      p.kernels = r.tensor("kernels");
      p.bias = r.tensor("bias");
      m.conv_params.push_back(std::move(p));
    }
    r.finish();
  }
  {
    Reader r = sections.open("liquid");
    auto slots = liquid_slots(m.liquid);
    for (std::size_t i = 0; i < slots.size(); ++i) *slots[i] = r.tensor(kLiquidNames[i]);
    r.finish();
    m.liquid.n_neurons = m.liquid.tau.size();
    m.liquid.n_inputs = m.liquid.w_in.rank() == 2 ? m.liquid.w_in.dim(1) : 0;
  }
  {
    Reader r = sections.open("head");
    m.head_w = r.tensor("w");
    m.head_b = r.tensor("b");
    r.finish();
  }
  sections.finish();
  try {
    m.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("model file decodes to an inconsistent model: ") + e.what());
  }
  return m;
}

std::string encode_model(const QuantModel& q) {
  std::string out;
  begin_file(out, ModelKind::kQuantized);
  {
    Writer w;
    w.f64(q.dt);
    w.u64(q.steps_per_input);
    w.i32(q.bits);
    w.i32(q.frac_bits);
    w.u64(q.source_fingerprint);
    add_section(out, "meta", w.take());
  }
  add_section(out, "wiring", wiring_payload(q.wiring));
  Writer conv, liquid, head;
  conv_spec_into(conv, q.conv);
  std::uint64_t n_conv = 0, n_liquid = 0, n_head = 0;
  for (const auto& t : q.tensors) {
    n_conv += t.name.starts_with("conv");
    n_liquid += t.name.starts_with("liquid.");
    n_head += t.name.starts_with("head.");
  }
  if (n_conv + n_liquid + n_head != q.tensors.size()) {
    throw ParameterError("quantized model holds a tensor outside the conv/liquid/head namespaces");
  }
  conv.u64(n_conv);
  liquid.u64(n_liquid);
  head.u64(n_head);
  for (const auto& t : q.tensors) {
    Writer& w = t.name.starts_with("conv") ? conv : t.name.starts_with("liquid.") ? liquid : head;
    w.qtensor(t.name, t.tensor);
  }
  add_section(out, "conv", conv.take());
  add_section(out, "liquid", liquid.take());
  add_section(out, "head", head.take());
  {
    Writer w;
    w.u64(q.activations.size());
    for (const ActivationRange& a : q.activations) {
      w.str(a.stage);
      w.f64(a.max_abs);
      w.f64(a.scale);
    }
    add_section(out, "scales", w.take());
  }
  return out;
}

QuantModel decode_quant_model(const std::string& bytes) {
  check_preamble(bytes, ModelKind::kQuantized);
  SectionCursor sections(bytes);
  QuantModel q;
  {
    Reader r = sections.open("meta");
    q.dt = r.f64();
    q.steps_per_input = r.size();
    q.bits = r.i32();
    q.frac_bits = r.i32();
    q.source_fingerprint = r.u64();
    r.finish();
    if (q.bits < 2 || q.bits > 32 || q.frac_bits < 0 || q.frac_bits >= q.bits) {
      r.fail("bad fixed-point format bits=" + std::to_string(q.bits) + " frac=" + std::to_string(q.frac_bits));
    }
  }
  q.wiring = read_wiring(sections.open("wiring"));
  auto read_group = [&](Reader& r) {
    const std::size_t n = r.size();
    for (std::size_t i = 0; i < n; ++i) q.tensors.push_back(r.qtensor());
    r.finish();
  };
  {
    Reader r = sections.open("conv");
    q.conv = read_conv_spec(r);
    read_group(r);
  }
  {
    Reader r = sections.open("liquid");
    read_group(r);
  }
  {
    Reader r = sections.open("head");
    read_group(r);
  }
  {
    Reader r = sections.open("scales");
    const std::size_t n = r.size();
    for (std::size_t i = 0; i < n; ++i) {
      ActivationRange a;
      a.stage = r.str();
      a.max_abs = r.f64();
      a.scale = r.f64();
      q.activations.push_back(std::move(a));
    }
    r.finish();
  }
  sections.finish();
  return q;
}

void save_model(const Model& model, const std::string& path) { write_file_atomic(path, encode_model(model)); }

void save_model(const QuantModel& qmodel, const std::string& path) {
  write_file_atomic(path, encode_model(qmodel));
}

Model load_model(const std::string& path) { return decode_model(read_file(path)); }

QuantModel load_quant_model(const std::string& path) { return decode_quant_model(read_file(path)); }

}  // namespace lnn
