#pragma once

#include <cstddef>
#include <string>

#include "lnn/config.hpp"
#include "lnn/cost_profiler.hpp"

namespace lnn::cli {

// Each stage reads its inputs from the paths in the config, writes its
// outputs atomically and returns the process exit status. Library errors
// propagate to main, which maps them onto exit codes.
int run_train(const RunConfig& cfg);
int run_eval(const RunConfig& cfg);
int run_quantize(const RunConfig& cfg);
int run_check(const RunConfig& cfg);
int run_compile(const RunConfig& cfg);
int run_simulate(const RunConfig& cfg);
int run_profile(const RunConfig& cfg);
int run_report(const RunConfig& cfg, ReportFormat format);
int run_wiring(const RunConfig& cfg);
// Ten classes, seeded from the config seed.
int run_synth(const RunConfig& cfg, const std::string& dir, std::size_t train_per_class,
              std::size_t test_per_class);

}  // namespace lnn::cli
