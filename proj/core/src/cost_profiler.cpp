#include "lnn/cost_profiler.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "lnn/error.hpp"
#include "lnn/model.hpp"
#include "lnn/quantize.hpp"

namespace lnn {

void ArchCounts::validate() const {
  if (t < 1) throw ParameterError("timestep count t must be >= 1");
  if (!(C >= 0.0) || !std::isfinite(C)) throw ParameterError("connections per neuron C must be finite and >= 0");
}

ArchCounts arch_counts(const ConvSpec& conv, const Shape& image_shape, const Wiring& wiring,
                       std::size_t steps_per_input, std::size_t n_classes) {
  ArchCounts c;
  c.D = wiring.spec.n_sensory;
  c.S = wiring.spec.liquid();
  c.A = 0;
  c.t = steps_per_input;
  c.N = wiring.spec.liquid();
  c.synapses = wiring.liquid_edge_count();
  c.C = c.N == 0 ? 0.0 : static_cast<double>(*c.synapses) / static_cast<double>(c.N);
  c.frontend = feature_mac_count(conv, image_shape);
  c.readout = static_cast<std::uint64_t>(n_classes) * wiring.spec.n_motor;
  return c;
}

ArchCounts arch_counts(const Model& model, const Shape& image_shape) {
  return arch_counts(model.conv, image_shape, model.wiring, model.steps_per_input, model.n_classes());
}

ArchCounts arch_counts(const QuantModel& qmodel, const Shape& image_shape) {
  return arch_counts(qmodel.conv, image_shape, qmodel.wiring, qmodel.steps_per_input, qmodel.n_classes());
}

std::uint64_t mac_embedding(std::uint64_t D, std::uint64_t S) { return D * S; }

std::uint64_t mac_adaptation(std::uint64_t A, std::uint64_t t) { return A * t; }

std::uint64_t mac_processing(std::uint64_t N, double C, std::uint64_t t) {
  if (N < 1) throw ParameterError("active neuron count N must be >= 1");
  if (t < 1) throw ParameterError("timestep count t must be >= 1");
  if (!(C >= 0.0) || !std::isfinite(C)) throw ParameterError("connections per neuron C must be finite and >= 0");
  return static_cast<std::uint64_t>(std::llround(static_cast<double>(N) * C)) * t;
}

std::uint64_t mac_processing_exact(std::uint64_t synapses, std::uint64_t t) { return synapses * t; }

std::uint64_t mac_total(const MacBreakdown& p) {
  return p.frontend + p.embedding + p.adaptation + p.processing + p.readout;
}

MacBreakdown mac_breakdown(const ArchCounts& c) {
  c.validate();
  MacBreakdown p;
  p.frontend = c.frontend;
  p.embedding = mac_embedding(c.D, c.S);
  p.adaptation = mac_adaptation(c.A, c.t);
  p.processing = c.synapses ? mac_processing_exact(*c.synapses, c.t) : mac_processing(c.N, c.C, c.t);
  p.readout = c.readout;
  p.total = mac_total(p);
  return p;
}

double latency(double total_inference_seconds, std::uint64_t n_samples) {
  if (n_samples == 0) throw ParameterError("latency needs at least one sample");
  return total_inference_seconds / static_cast<double>(n_samples);
}

double throughput(std::uint64_t mac_total, double latency_seconds) {
  if (!(latency_seconds > 0.0)) throw ParameterError("throughput is undefined for latency <= 0");
  return static_cast<double>(mac_total) / latency_seconds;
}

CostReport make_cost_report(std::string name, const MacBreakdown& macs, double latency_seconds,
                            std::optional<double> power_watts, std::optional<double> energy_per_frame_joules,
                            std::optional<double> accuracy_percent) {
  CostReport r;
  r.name = std::move(name);
  r.accuracy_percent = accuracy_percent;
  r.macs = macs;
  r.latency_seconds = latency_seconds;
  r.throughput_ops_per_second = throughput(macs.total, latency_seconds);
  if (power_watts) {
    if (!(*power_watts > 0.0)) throw ParameterError("power_watts must be > 0");
    r.power_watts = power_watts;
    r.power_efficiency_ops_per_joule = r.throughput_ops_per_second / *power_watts;
  }
  r.energy_per_frame_joules = energy_per_frame_joules;
  return r;
}

namespace {

constexpr const char* kReportHeader =
    "name,accuracy_percent,mac_frontend,mac_embedding,mac_adaptation,mac_processing,mac_readout,"
    "mac_total,latency_seconds,throughput_ops_per_second,power_watts,power_efficiency_ops_per_joule,"
    "energy_per_frame_joules";

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string exact(const std::optional<double>& v) { return v ? exact(*v) : std::string(); }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& s, std::size_t line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw FormatError("report line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

std::uint64_t parse_count(const std::string& s, std::size_t line_no) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || s.front() == '-') {
    throw FormatError("report line " + std::to_string(line_no) + ": bad count '" + s + "'");
  }
  return v;
}

std::optional<double> parse_optional(const std::string& s, std::size_t line_no) {
  if (s.empty()) return std::nullopt;
  return parse_real(s, line_no);
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

void write_cost_reports(const std::vector<CostReport>& reports, std::ostream& out) {
  out << kReportHeader << '\n';
  for (const CostReport& r : reports) {
    if (r.name.find(',') != std::string::npos) throw ParameterError("report name contains a comma: " + r.name);
    out << r.name << ',' << exact(r.accuracy_percent) << ',' << r.macs.frontend << ',' << r.macs.embedding << ','
        << r.macs.adaptation << ',' << r.macs.processing << ',' << r.macs.readout << ',' << r.macs.total << ','
        << exact(r.latency_seconds) << ',' << exact(r.throughput_ops_per_second) << ',' << exact(r.power_watts)
        << ',' << exact(r.power_efficiency_ops_per_joule) << ',' << exact(r.energy_per_frame_joules) << '\n';
  }
}

std::vector<CostReport> read_cost_reports(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != kReportHeader) {
    throw FormatError("cost report: missing or unexpected header");
  }
  std::vector<CostReport> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 13) {
      throw FormatError("report line " + std::to_string(line_no) + ": expected 13 fields, got " +
                        std::to_string(f.size()));
    }
    CostReport r;
    r.name = f[0];
    r.accuracy_percent = parse_optional(f[1], line_no);
    r.macs.frontend = parse_count(f[2], line_no);
    r.macs.embedding = parse_count(f[3], line_no);
    r.macs.adaptation = parse_count(f[4], line_no);
    r.macs.processing = parse_count(f[5], line_no);
    r.macs.readout = parse_count(f[6], line_no);
    r.macs.total = parse_count(f[7], line_no);
    r.latency_seconds = parse_real(f[8], line_no);
    r.throughput_ops_per_second = parse_real(f[9], line_no);
    r.power_watts = parse_optional(f[10], line_no);
    r.power_efficiency_ops_per_joule = parse_optional(f[11], line_no);
    r.energy_per_frame_joules = parse_optional(f[12], line_no);
    out.push_back(std::move(r));
  }
  return out;
}

bool throughput_consistent(const CostReport& r) {
  if (r.macs.total != mac_total(r.macs)) return false;
  if (!(r.latency_seconds > 0.0)) return false;
  if (r.throughput_ops_per_second != static_cast<double>(r.macs.total) / r.latency_seconds) return false;
  if (r.power_watts.has_value() != r.power_efficiency_ops_per_joule.has_value()) return false;
  if (r.power_watts && *r.power_efficiency_ops_per_joule != r.throughput_ops_per_second / *r.power_watts) {
    return false;
  }
  return true;
}

std::vector<LiteratureRow> read_literature(std::istream& in) {
  std::vector<LiteratureRow> rows;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != kLiteratureHeader) {
        throw FormatError("literature file line " + std::to_string(line_no) + ": expected header '" +
                          kLiteratureHeader + "'");
      }
      header_seen = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 7) {
      throw FormatError("literature file line " + std::to_string(line_no) + ": expected 7 fields, got " +
                        std::to_string(f.size()));
    }
    rows.push_back({f[0], f[1], f[2], f[3], f[4], f[5], f[6]});
  }
  if (!header_seen) throw FormatError("literature file has no header");
  return rows;
}

std::vector<LiteratureRow> load_literature(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open literature file " + path);
  return read_literature(in);
}

std::string format_sig3(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string format_si(double v) {
  if (v == 0.0 || !std::isfinite(v)) return format_sig3(v);
  struct Prefix {
    double factor;
    const char* symbol;
  };
  static constexpr Prefix kPrefixes[] = {{1.0, ""}, {1e-3, "m"}, {1e-6, "µ"}, {1e-9, "n"}};
  const double mag = std::fabs(v);
  for (const Prefix& p : kPrefixes) {
    // Round first so 999.7e-6 lands in the next prefix up as 1.00m.
    const double scaled = std::stod(format_sig3(mag / p.factor));
    if (scaled >= 1.0 || p.factor == 1e-9) {
      if (scaled >= 1000.0) continue;
      return format_sig3(v / p.factor) + p.symbol;
    }
  }
  return format_sig3(v);
}

namespace {

constexpr const char* kEmpty = "—";

std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0u) != 0x80u;
  return n;
}

std::string or_empty(const std::string& s) { return s.empty() ? kEmpty : s; }

}  // namespace

std::string comparison_report(const std::vector<LiteratureRow>& literature,
                              const std::vector<CostReport>& measured, ReportFormat format) {
  if (literature.empty() && measured.empty()) throw ParameterError("comparison report needs at least one entry");
  std::vector<std::vector<std::string>> table;
  table.push_back({"Model", "Hardware", "Source", "Accuracy (%)", "MAC (GOP)", "Latency (ms)",
                   "Power Efficiency (GOP/s/W)", "Energy (J/frame)"});
  for (const LiteratureRow& r : literature) {
    table.push_back({r.name, or_empty(r.hardware), "literature", or_empty(r.accuracy_percent), or_empty(r.mac_gop),
                     or_empty(r.latency_ms), or_empty(r.power_efficiency_gops_per_w),
                     or_empty(r.energy_j_per_frame)});
  }
  for (const CostReport& r : measured) {
    table.push_back({r.name, "simulated", "measured",
                     r.accuracy_percent ? format_sig3(*r.accuracy_percent) : kEmpty,
                     format_sig3(static_cast<double>(r.macs.total) / 1e9), format_sig3(r.latency_seconds * 1e3),
                     r.power_efficiency_ops_per_joule ? format_sig3(*r.power_efficiency_ops_per_joule / 1e9) : kEmpty,
                     r.energy_per_frame_joules ? format_si(*r.energy_per_frame_joules) : kEmpty});
  }

  std::ostringstream out;
  if (format == ReportFormat::csv) {
    for (const auto& row : table) {
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
      out << '\n';
    }
    return out.str();
  }

  std::vector<std::size_t> width(table.front().size(), 0);
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], display_width(row[c]));
  }
  auto emit = [&](const std::vector<std::string>& row) {
    out << '|';
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << ' ' << row[c] << std::string(width[c] - display_width(row[c]), ' ') << " |";
    }
    out << '\n';
  };
  emit(table.front());
  out << '|';
  for (std::size_t w : width) out << std::string(w + 2, '-') << '|';
  out << '\n';
  for (std::size_t i = 1; i < table.size(); ++i) emit(table[i]);
  out << "\nLiterature rows are published values carried verbatim, not measurements.\n"
      << "Measured MAC totals add the conv frontend and the readout layer to the liquid-stage counts.\n"
      << "1 GOP = 1e9 MACs; " << kEmpty << " marks a value that was not supplied.\n";
  return out.str();
}

}  // namespace lnn
