#include "lnn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <thread>

#include "lnn/atomic_file.hpp"
#include "lnn/error.hpp"
#include "lnn/model_io.hpp"
#include "lnn/rng.hpp"

namespace lnn {

namespace {

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  return rng.sample_without_replacement(n, n);
}

}  // namespace

BatchGradient batch_gradient(const Model& model, const Dataset& data,
                             const std::vector<std::size_t>& indices, std::size_t threads) {
  if (indices.empty()) throw ParameterError("empty batch");
  std::vector<BackwardResult> per_sample(indices.size());
  auto work = [&](std::size_t worker, std::size_t stride) {
    for (std::size_t b = worker; b < indices.size(); b += stride) {
      const std::size_t i = indices[b];
      per_sample[b] = backward(model, forward(model, data.image(i)), data.labels[i]);
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, indices.size()));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
  }
  BatchGradient out;
  out.grads = zero_gradients(model);
  const double inv = 1.0 / static_cast<double>(indices.size());
  double loss = 0.0;
  for (std::size_t b = 0; b < indices.size(); ++b) {
    out.grads.add_scaled(per_sample[b].grads, inv);
    loss += per_sample[b].loss;
    if (argmax(per_sample[b].probabilities) == data.labels[indices[b]]) ++out.correct;
  }
  out.mean_loss = loss * inv;
  return out;
}

TrainResult train(Model model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  if (train_set.size() == 0) throw ParameterError("training set is empty");
  if (config.epochs == 0 || config.batch_size == 0) throw ParameterError("epochs and batch_size must be positive");
  model.validate();

  AdamState adam = make_adam_state(named_parameters(std::as_const(model)), config.adam);
  Rng rng(config.seed);
  TrainResult result;
  result.model = model;
  double best_val = -1.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto order = shuffled(train_set.size(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      BatchGradient bg = batch_gradient(model, train_set, batch, config.threads);
      if (!std::isfinite(bg.mean_loss)) {
        std::string where = "training diverged (non-finite loss) in epoch " + std::to_string(epoch);
        if (!config.checkpoint_path.empty() && result.best_epoch > 0) {
          where += "; last good checkpoint retained at '" + config.checkpoint_path + "'";
        }
        throw NumericError(where);
      }
      adam_update(model, bg.grads, adam);
      loss_sum += bg.mean_loss * static_cast<double>(batch.size());
      correct += bg.correct;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(train_set.size());
    m.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());
    m.val_acc = val_set.size() > 0 ? evaluate(model, val_set).accuracy : m.train_acc;
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(m);

    if (m.val_acc > best_val) {
      best_val = m.val_acc;
      result.best_epoch = epoch;
      result.model = model;
      if (!config.checkpoint_path.empty()) save_model(model, config.checkpoint_path);
    }
    if (!config.log_path.empty()) write_file_atomic(config.log_path, metrics_csv(result.log));
    if (on_epoch) on_epoch(m);
  }
  return result;
}

std::string metrics_csv(const std::vector<EpochMetrics>& log) {
  std::ostringstream out;
  out << "epoch,train_loss,train_acc,val_acc,seconds\n";
  char line[256];
  for (const EpochMetrics& m : log) {
    std::snprintf(line, sizeof line, "%zu,%.10g,%.6f,%.6f,%.3f\n", m.epoch, m.train_loss, m.train_acc,
                  m.val_acc, m.seconds);
    out << line;
  }
  return out.str();
}

Evaluation evaluate(const Model& model, const Dataset& dataset) {
  if (dataset.size() == 0) throw ParameterError("cannot evaluate on an empty dataset");
  const std::size_t classes = model.n_classes();
  Evaluation e;
  e.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::size_t label = dataset.labels[i];
    if (label >= classes) throw ParameterError("label " + std::to_string(label) + " exceeds model classes");
    const std::size_t pred = argmax(forward(model, dataset.image(i)).logits);
    ++e.confusion[label][pred];
    if (pred == label) ++correct;
  }
  e.accuracy = static_cast<double>(correct) / static_cast<double>(dataset.size());
  return e;
}

std::vector<double> train_sequence_model(SequenceModel& model, const SequenceDataset& data,
                                         const SequenceTrainConfig& config) {
  if (data.size() == 0) throw ParameterError("sequence dataset is empty");
  AdamState adam = make_adam_state(named_parameters(std::as_const(model)), config.adam);
  Rng rng(config.seed);
  std::vector<double> losses;
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    Gradients grads;
    double loss = 0.0;
    const std::size_t batch = std::min(config.batch_size, data.size());
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        order = shuffled(data.size(), rng);
        cursor = 0;
      }
      const std::size_t i = order[cursor++];
      BackwardResult r = backward_sequence(model, forward_sequence(model, data.sequences[i]), data.labels[i]);
      if (grads.tensors.empty()) {
        grads = std::move(r.grads);
        for (Tensor& t : grads.tensors) t.scale(1.0 / static_cast<double>(batch));
      } else {
        grads.add_scaled(r.grads, 1.0 / static_cast<double>(batch));
      }
      loss += r.loss / static_cast<double>(batch);
    }
    if (!std::isfinite(loss)) throw NumericError("sequence training diverged at step " + std::to_string(step));
    adam_update(model, grads, adam);
    losses.push_back(loss);
  }
  return losses;
}

double sequence_accuracy(const SequenceModel& model, const SequenceDataset& data) {
  if (data.size() == 0) throw ParameterError("sequence dataset is empty");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    correct += argmax(forward_sequence(model, data.sequences[i]).logits) == data.labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace lnn
