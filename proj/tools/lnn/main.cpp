#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "lnn/error.hpp"
#include "pipeline.hpp"

namespace {

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("lnn");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const char* level = std::getenv("LNN_LOG");
  const std::string value = level ? level : "info";
  if (value == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else if (value == "quiet") {
    spdlog::set_level(spdlog::level::off);
  } else {
    spdlog::set_level(spdlog::level::info);
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"Liquid neural network pipeline: train, quantize, check, compile, simulate, profile, report"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  app.add_option("--config", config_path, "Run configuration file (key = value)");
  app.add_option("--set", overrides, "Override a config key, key=value (repeatable)");
  app.add_option("--seed", seed, "Override the global seed")->check(CLI::NonNegativeNumber);

  std::string format = "";
  struct Stage {
    const char* name;
    const char* help;
  };
  const Stage stages[] = {
      {"train", "Train on the configured CIFAR-10 subset and save the best-validation model"},
      {"eval", "Evaluate the saved model on the test split"},
      {"quantize", "Post-training quantization of the saved model"},
      {"check", "Readiness and compatibility checks against the chip spec"},
      {"compile", "Map liquid neurons onto chip cores"},
      {"simulate", "Fixed-point inference and golden-output export"},
      {"profile", "MAC, latency, throughput and energy report"},
      {"report", "Comparison table of literature rows and measured reports"},
      {"wiring", "Build the configured wiring and export its edge list"},
  };
  std::string synth_dir;
  std::size_t synth_train = 500;
  std::size_t synth_test = 100;
  for (const Stage& s : stages) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    if (std::string(s.name) == "report") {
      sub->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "md"}));
    }
  }
  CLI::App* synth = app.add_subcommand(
      "synth", "Write synthetic images in the CIFAR-10 binary layout (data_batch_1/2.bin, test_batch.bin)");
  synth->add_option("--out", synth_dir, "Output directory")->required();
  synth->add_option("--train-per-class", synth_train, "Images per class in each train batch")
      ->check(CLI::PositiveNumber);
  synth->add_option("--test-per-class", synth_test, "Images per class in the test batch")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    lnn::RunConfig cfg = config_path.empty() ? lnn::RunConfig{} : lnn::RunConfig::from_file(config_path);
    for (const std::string& o : overrides) cfg.apply_override(o);
    if (seed >= 0) cfg.set("seed", std::to_string(seed));

    const std::string stage = app.get_subcommands().front()->get_name();
    if (stage == "train") return lnn::cli::run_train(cfg);
    if (stage == "eval") return lnn::cli::run_eval(cfg);
    if (stage == "quantize") return lnn::cli::run_quantize(cfg);
    if (stage == "check") return lnn::cli::run_check(cfg);
    if (stage == "compile") return lnn::cli::run_compile(cfg);
    if (stage == "simulate") return lnn::cli::run_simulate(cfg);
    if (stage == "profile") return lnn::cli::run_profile(cfg);
    if (stage == "wiring") return lnn::cli::run_wiring(cfg);
    if (stage == "synth") return lnn::cli::run_synth(cfg, synth_dir, synth_train, synth_test);
    const std::string chosen = format.empty() ? cfg.get("report.format") : format;
    if (chosen != "md" && chosen != "csv") throw lnn::ConfigError("report.format must be md or csv");
    return lnn::cli::run_report(cfg, chosen == "csv" ? lnn::ReportFormat::csv : lnn::ReportFormat::markdown);
  } catch (const lnn::IoError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const lnn::FormatError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const lnn::Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return 1;
  }
}
