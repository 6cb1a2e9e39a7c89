#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lnn/frontend.hpp"
#include "lnn/ncp_wiring.hpp"
#include "lnn/tensor.hpp"

namespace lnn {

struct Model;
struct QuantModel;

// Architecture counts for the analytic MAC model. A is the adaptation cost
// in MACs per timestep and t the number of fused steps per frame.
struct ArchCounts {
  std::uint64_t D = 0;
  std::uint64_t S = 0;
  std::uint64_t A = 0;
  std::uint64_t t = 1;
  std::uint64_t N = 1;
  double C = 0.0;
  // Exact N*C when the counts come from a Wiring.
  std::optional<std::uint64_t> synapses;
  std::uint64_t frontend = 0;
  std::uint64_t readout = 0;

  void validate() const;
};

ArchCounts arch_counts(const ConvSpec& conv, const Shape& image_shape, const Wiring& wiring,
                       std::size_t steps_per_input, std::size_t n_classes);
ArchCounts arch_counts(const Model& model, const Shape& image_shape);
ArchCounts arch_counts(const QuantModel& qmodel, const Shape& image_shape);

std::uint64_t mac_embedding(std::uint64_t D, std::uint64_t S);
std::uint64_t mac_adaptation(std::uint64_t A, std::uint64_t t);
// round(N*C)*t. Throws ParameterError for N < 1, t < 1 or C < 0.
std::uint64_t mac_processing(std::uint64_t N, double C, std::uint64_t t);
std::uint64_t mac_processing_exact(std::uint64_t synapses, std::uint64_t t);

struct MacBreakdown {
  std::uint64_t frontend = 0;
  std::uint64_t embedding = 0;
  std::uint64_t adaptation = 0;
  std::uint64_t processing = 0;
  std::uint64_t readout = 0;
  std::uint64_t total = 0;

  friend bool operator==(const MacBreakdown&, const MacBreakdown&) = default;
};

MacBreakdown mac_breakdown(const ArchCounts& counts);
std::uint64_t mac_total(const MacBreakdown& parts);

// Per-frame latency. Throws ParameterError for n_samples == 0.
double latency(double total_inference_seconds, std::uint64_t n_samples);
// Throws ParameterError unless latency_seconds > 0.
double throughput(std::uint64_t mac_total, double latency_seconds);

struct CostReport {
  std::string name;
  std::optional<double> accuracy_percent;
  MacBreakdown macs;
  double latency_seconds = 0.0;
  double throughput_ops_per_second = 0.0;
  std::optional<double> power_watts;
  std::optional<double> power_efficiency_ops_per_joule;
  std::optional<double> energy_per_frame_joules;

  friend bool operator==(const CostReport&, const CostReport&) = default;
};

CostReport make_cost_report(std::string name, const MacBreakdown& macs, double latency_seconds,
                            std::optional<double> power_watts = std::nullopt,
                            std::optional<double> energy_per_frame_joules = std::nullopt,
                            std::optional<double> accuracy_percent = std::nullopt);

// CSV with every real printed at 17 significant digits, so values read
// back bit-exactly. Empty cells mark absent optionals.
void write_cost_reports(const std::vector<CostReport>& reports, std::ostream& out);
std::vector<CostReport> read_cost_reports(std::istream& in);

// throughput == mac_total / latency and, when power is present,
// power_efficiency == throughput / power, both in double arithmetic.
bool throughput_consistent(const CostReport& report);

// Published comparison values, carried as text so they render verbatim.
struct LiteratureRow {
  std::string name;
  std::string hardware;
  std::string accuracy_percent;
  std::string mac_gop;
  std::string latency_ms;
  std::string power_efficiency_gops_per_w;
  std::string energy_j_per_frame;
};

inline constexpr const char* kLiteratureHeader =
    "name,hardware,accuracy_percent,mac_gop,latency_ms,power_efficiency_gops_per_w,energy_j_per_frame";

// Lines starting with '#' are comments; the first other line must equal
// kLiteratureHeader. Throws FormatError.
std::vector<LiteratureRow> read_literature(std::istream& in);
std::vector<LiteratureRow> load_literature(const std::string& path);

enum class ReportFormat { markdown, csv };

// "%.3g"-style significant digits.
std::string format_sig3(double v);
// Three significant digits with an SI prefix (m, µ, n): 2.13e-4 -> "213µ".
std::string format_si(double v);

// Comparison table with one row per literature entry followed by one per
// measured report. Throws ParameterError if both lists are empty.
std::string comparison_report(const std::vector<LiteratureRow>& literature,
                              const std::vector<CostReport>& measured, ReportFormat format);

}  // namespace lnn
