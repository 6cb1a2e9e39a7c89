#include "pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <sstream>

#include "lnn/atomic_file.hpp"
#include "lnn/deploy.hpp"
#include "lnn/error.hpp"
#include "lnn/model_io.hpp"
#include "lnn/quantize.hpp"
#include "lnn/trainer.hpp"

namespace lnn::cli {
namespace {

struct Splits {
  Dataset train;
  Dataset val;
};

std::vector<std::size_t> classes_of(const RunConfig& cfg) {
  auto classes = cfg.count_list("data.classes");
  if (classes.empty()) throw ConfigError("data.classes must list at least one class index");
  return classes;
}

Splits load_train_val(const RunConfig& cfg) {
  const auto files = cfg.list("data.train_files");
  if (files.empty()) throw ConfigError("data.train_files is required for this stage");
  const CifarRecords records = load_cifar10_records(files);
  DatasetPair pair = subset_split(records, classes_of(cfg), cfg.count("data.train_per_class"),
                                  cfg.count("data.val_per_class"), cfg.count("data.downscale"), cfg.seed());
  pair.first.split = "train";
  pair.second.split = "val";
  spdlog::info("loaded {} train / {} val images from {} file(s)", pair.first.size(), pair.second.size(),
               files.size());
  return {std::move(pair.first), std::move(pair.second)};
}

Dataset load_test(const RunConfig& cfg) {
  const auto files = cfg.list("data.test_files");
  if (files.empty()) throw ConfigError("data.test_files is required for this stage");
  Dataset test = subset_and_downscale(load_cifar10_records(files), classes_of(cfg),
                                      cfg.count("data.test_per_class"), cfg.count("data.downscale"), cfg.seed());
  test.split = "test";
  spdlog::info("loaded {} test images", test.size());
  return test;
}

// Evaluation images for the simulator stages: the test split when one is
// configured, otherwise the validation split.
Dataset load_eval_images(const RunConfig& cfg) {
  if (!cfg.list("data.test_files").empty()) return load_test(cfg);
  spdlog::warn("data.test_files not set; using the validation split");
  return load_train_val(cfg).val;
}

ExecutionPlan load_plan(const RunConfig& cfg, const QuantModel& q, const ChipSpec& chip) {
  std::istringstream in(read_file(cfg.get("out.plan")));
  return plan_from_assignment(q, chip, read_plan_assignment(in));
}

std::string confusion_text(const Evaluation& e, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "confusion (rows: true, cols: predicted)\n";
  for (std::size_t t = 0; t < e.confusion.size(); ++t) {
    char label[32];
    std::snprintf(label, sizeof label, "%-12s", t < names.size() ? names[t].c_str() : "?");
    out << label;
    for (std::size_t v : e.confusion[t]) {
      char cell[16];
      std::snprintf(cell, sizeof cell, " %6zu", v);
      out << cell;
    }
    out << '\n';
  }
  return out.str();
}

std::size_t fixed_argmax(const std::vector<std::int32_t>& logits) {
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

}  // namespace

int run_train(const RunConfig& cfg) {
  Splits s = load_train_val(cfg);
  Model model = build_model(cfg.model_config());
  spdlog::info("model has {} trainable parameters", model.parameter_count());
  const TrainConfig tc = cfg.train_config();
  TrainResult result = train(std::move(model), s.train, s.val, tc, [](const EpochMetrics& m) {
    spdlog::info("epoch {:>3}  loss {:.4f}  train {:.3f}  val {:.3f}  {:.1f}s", m.epoch, m.train_loss, m.train_acc,
                 m.val_acc, m.seconds);
  });
  save_model(result.model, cfg.get("out.model"));
  const EpochMetrics& best = result.log.at(result.best_epoch - 1);
  std::printf("best epoch %zu  val_acc %.4f\nmodel written to %s\n", result.best_epoch, best.val_acc,
              cfg.get("out.model").c_str());
  if (!cfg.list("data.test_files").empty()) {
    const Evaluation e = evaluate(result.model, load_test(cfg));
    std::printf("test_acc %.4f\n", e.accuracy);
  }
  return 0;
}

int run_eval(const RunConfig& cfg) {
  const Model model = load_model(cfg.get("out.model"));
  const Dataset test = load_test(cfg);
  const Evaluation e = evaluate(model, test);
  std::printf("test_acc %.4f over %zu images\n%s", e.accuracy, test.size(),
              confusion_text(e, test.class_names).c_str());
  return 0;
}

int run_quantize(const RunConfig& cfg) {
  const Model model = load_model(cfg.get("out.model"));
  const std::size_t wanted = cfg.count("quant.calibration_samples");
  if (wanted == 0) throw ConfigError("quant.calibration_samples must be >= 1");
  Dataset source = cfg.list("data.train_files").empty() ? load_test(cfg) : load_train_val(cfg).train;
  std::vector<Tensor> calibration;
  for (std::size_t i = 0; i < std::min(wanted, source.size()); ++i) calibration.push_back(source.image(i));
  const QuantModel q = quantize_model(model, calibration, cfg.chip_spec());
  save_model(q, cfg.get("out.qmodel"));
  std::printf("quantized %zu tensors to %d-bit (Q%d.%d), %zu calibration images\nwritten to %s\n",
              q.tensors.size(), q.bits, q.bits - q.frac_bits, q.frac_bits, calibration.size(),
              cfg.get("out.qmodel").c_str());
  return 0;
}

int run_check(const RunConfig& cfg) {
  const Model model = load_model(cfg.get("out.model"));
  const ReadinessReport report = readiness_check(model, cfg.chip_spec());
  const std::string text = report.to_text();
  write_file_atomic(cfg.get("out.readiness"), text);
  std::fputs(text.c_str(), stdout);
  return report.pass() ? 0 : 1;
}

int run_compile(const RunConfig& cfg) {
  const ChipSpec chip = cfg.chip_spec();
  const QuantModel q = load_quant_model(cfg.get("out.qmodel"));
  const ExecutionPlan plan = compile(q, chip);
  std::ostringstream text;
  write_plan(plan, text);
  write_file_atomic(cfg.get("out.plan"), text.str());
  std::size_t occupied = 0, lo = SIZE_MAX, hi = 0;
  for (std::size_t c = 0; c < plan.core_neurons.size(); ++c) {
    if (plan.core_neurons[c] == 0) continue;
    ++occupied;
    lo = std::min(lo, plan.core_synapses[c]);
    hi = std::max(hi, plan.core_synapses[c]);
  }
  std::printf("%zu neurons on %zu of %zu cores, synapses per occupied core %zu..%zu (ratio %.3f)\nplan written to %s\n",
              plan.neuron_core.size(), occupied, chip.core_count, lo, hi,
              lo ? static_cast<double>(hi) / static_cast<double>(lo) : 0.0, cfg.get("out.plan").c_str());
  return 0;
}

int run_simulate(const RunConfig& cfg) {
  const ChipSpec chip = cfg.chip_spec();
  const QuantModel q = load_quant_model(cfg.get("out.qmodel"));
  const ExecutionPlan plan = load_plan(cfg, q, chip);
  const Dataset images = load_eval_images(cfg);
  const std::size_t n = std::min(cfg.count("sim.samples"), images.size());
  if (n == 0) throw ConfigError("sim.samples must be >= 1 and the evaluation split non-empty");

  std::optional<Model> reference;
  if (std::filesystem::exists(cfg.get("out.model"))) reference = load_model(cfg.get("out.model"));

  const FixedPointEngine engine(plan, q);
  std::vector<std::vector<std::int32_t>> frames;
  std::uint64_t saturations = 0, macs = 0;
  std::size_t correct = 0, agree = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor image = images.image(i);
    FixedPointResult r = engine.run(image);
    saturations += r.stats.saturations;
    macs = r.stats.macs_total;
    const std::size_t pred = fixed_argmax(r.logits);
    correct += pred == images.labels[i];
    if (reference) agree += pred == argmax(forward(*reference, image).logits);
    frames.push_back(std::move(r.logits));
  }
  write_file_atomic(cfg.get("out.golden"), encode_golden(frames));
  std::printf("simulated %zu frames, %llu MACs/frame, %llu saturations\nfixed-point accuracy %.4f\n", n,
              static_cast<unsigned long long>(macs), static_cast<unsigned long long>(saturations),
              static_cast<double>(correct) / static_cast<double>(n));
  if (reference) {
    std::printf("argmax agreement with float model %.4f\n", static_cast<double>(agree) / static_cast<double>(n));
  }
  std::printf("golden logits written to %s\n", cfg.get("out.golden").c_str());
  return 0;
}

int run_profile(const RunConfig& cfg) {
  const ChipSpec chip = cfg.chip_spec();
  const QuantModel q = load_quant_model(cfg.get("out.qmodel"));
  const ExecutionPlan plan = load_plan(cfg, q, chip);
  const Dataset images = load_eval_images(cfg);
  const std::size_t n = std::min(cfg.count("profile.samples"), images.size());
  if (n == 0) throw ConfigError("profile.samples must be >= 1 and the evaluation split non-empty");

  const FixedPointEngine engine(plan, q);
  const MacBreakdown analytic = mac_breakdown(arch_counts(q, images.image_shape()));
  double seconds = 0.0;
  std::size_t correct = 0;
  ExecutionStats stats;
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor image = images.image(i);
    const auto start = std::chrono::steady_clock::now();
    FixedPointResult r = engine.run(image);
    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    correct += fixed_argmax(r.logits) == images.labels[i];
    stats = std::move(r.stats);
  }
  if (stats.macs_total != analytic.total) {
    throw ValidationError("executed MACs " + std::to_string(stats.macs_total) + " differ from the analytic count " +
                          std::to_string(analytic.total));
  }
  const CostReport report = make_cost_report(
      "LNN-desk", analytic, latency(seconds, n), cfg.optional_real("profile.power_watts"),
      estimate_energy(stats, chip), 100.0 * static_cast<double>(correct) / static_cast<double>(n));
  std::ostringstream csv;
  write_cost_reports({report}, csv);
  write_file_atomic(cfg.get("out.cost"), csv.str());
  std::printf("MACs per frame: frontend %llu, embedding %llu, adaptation %llu, processing %llu, readout %llu, total %llu\n",
              static_cast<unsigned long long>(analytic.frontend), static_cast<unsigned long long>(analytic.embedding),
              static_cast<unsigned long long>(analytic.adaptation),
              static_cast<unsigned long long>(analytic.processing),
              static_cast<unsigned long long>(analytic.readout), static_cast<unsigned long long>(analytic.total));
  std::printf("latency %.6g s/frame over %zu frames, throughput %.6g op/s, energy %s J/frame\n",
              report.latency_seconds, n, report.throughput_ops_per_second,
              format_si(*report.energy_per_frame_joules).c_str());
  std::printf("cost report written to %s\n", cfg.get("out.cost").c_str());
  return 0;
}

int run_report(const RunConfig& cfg, ReportFormat format) {
  const auto literature = load_literature(cfg.get("report.reference"));
  std::vector<CostReport> measured;
  const std::string cost_path = cfg.get("out.cost");
  if (std::filesystem::exists(cost_path)) {
    std::istringstream in(read_file(cost_path));
    measured = read_cost_reports(in);
  } else {
    spdlog::info("no cost report at {}; rendering literature rows only", cost_path);
  }
  const std::string table = comparison_report(literature, measured, format);
  write_file_atomic(cfg.get("out.report"), table);
  std::fputs(table.c_str(), stdout);
  return 0;
}

int run_wiring(const RunConfig& cfg) {
  const Wiring wiring = build_ncp(cfg.wiring_spec());
  const auto violations = validate(wiring);
  std::ostringstream edges;
  write_edge_list(wiring, edges);
  write_file_atomic(cfg.get("out.edges"), edges.str());
  std::printf("%zu neurons, %zu edges, %zu violations\nedge list written to %s\n", wiring.n, wiring.edge_count(),
              violations.size(), cfg.get("out.edges").c_str());
  for (const Violation& v : violations) std::printf("  %s: %s\n", violation_name(v.kind), v.message.c_str());
  return violations.empty() ? 0 : 1;
}

int run_synth(const RunConfig& cfg, const std::string& dir, std::size_t train_per_class,
              std::size_t test_per_class) {
  const std::filesystem::path root(dir);
  std::filesystem::create_directories(root);
  const std::uint64_t seed = cfg.seed();
  const struct {
    const char* file;
    std::size_t per_class;
    std::uint64_t stream;
  } batches[] = {{"data_batch_1.bin", train_per_class, 1}, {"data_batch_2.bin", train_per_class, 2},
                 {"test_batch.bin", test_per_class, 3}};
  for (const auto& b : batches) {
    const Dataset ds = synth_color_images(seed * 16 + b.stream, b.per_class, kCifarClassNames.size());
    const std::string path = (root / b.file).string();
    write_cifar10(ds, path);
    std::printf("%s: %zu images\n", path.c_str(), ds.size());
  }
  return 0;
}

}  // namespace lnn::cli
