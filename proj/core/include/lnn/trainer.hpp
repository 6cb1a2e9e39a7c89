#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lnn/adam.hpp"
#include "lnn/dataset.hpp"
#include "lnn/model.hpp"

namespace lnn {

struct TrainConfig {
  std::size_t epochs = 15;
  std::size_t batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string checkpoint_path;  // best-validation model, LNNM format; empty = none
  std::string log_path;         // metrics CSV; empty = none
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  Model model;  // parameters of the best validation epoch
  std::vector<EpochMetrics> log;
  std::size_t best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Mini-batch Adam with a seeded shuffle per epoch. The batch gradient is the
// mean of per-sample gradients summed in sample order, so results do not
// depend on config.threads. Aborts with NumericError on a NaN loss.
TrainResult train(Model model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// Metrics CSV with header epoch,train_loss,train_acc,val_acc,seconds.
std::string metrics_csv(const std::vector<EpochMetrics>& log);

struct Evaluation {
  double accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

Evaluation evaluate(const Model& model, const Dataset& dataset);

// Mean batch gradient for the listed samples (deterministic ordered sum).
struct BatchGradient {
  Gradients grads;
  double mean_loss = 0.0;
  std::size_t correct = 0;
};
BatchGradient batch_gradient(const Model& model, const Dataset& data,
                             const std::vector<std::size_t>& indices, std::size_t threads = 1);

struct SequenceTrainConfig {
  std::size_t steps = 200;  // optimizer steps
  std::size_t batch_size = 16;
  AdamConfig adam{0.02, 0.9, 0.999, 1e-8};
  std::uint64_t seed = 1;
};

// Returns the mean batch loss of every optimizer step.
std::vector<double> train_sequence_model(SequenceModel& model, const SequenceDataset& data,
                                         const SequenceTrainConfig& config);
double sequence_accuracy(const SequenceModel& model, const SequenceDataset& data);

}  // namespace lnn
