#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "lnn/adam.hpp"
#include "lnn/dataset.hpp"
#include "lnn/error.hpp"
#include "lnn/model_io.hpp"
#include "lnn/trainer.hpp"

namespace lnn {
namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.conv.layers = {{3, 4, 3, 1, 1, true}};
  c.wiring = {4, 4, 3, 3, 2, 2, 2, 0.3, 5};
  c.n_classes = 3;
  c.dt = 0.5;
  c.steps_per_input = 3;
  c.liquid_init = {0.5, 10.0, 0.01, 3.0, 6.0, 18.0, -6.0, 6.0, 0.5, 1.0};
  return c;
}

Dataset tiny_images(std::uint64_t seed, std::size_t per_class) {
  Dataset d = synth_color_images(seed, per_class, 3, 8);
  return d;
}

bool same_metrics(const std::vector<EpochMetrics>& a, const std::vector<EpochMetrics>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].epoch != b[i].epoch || a[i].train_loss != b[i].train_loss || a[i].train_acc != b[i].train_acc ||
        a[i].val_acc != b[i].val_acc) {
      return false;
    }
  }
  return true;
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Model m = build_model(tiny_config());
  const Model before = m;
  AdamState st = make_adam_state(named_parameters(std::as_const(m)), AdamConfig{});
  adam_update(m, zero_gradients(m), st);
  EXPECT_EQ(m, before);
  EXPECT_EQ(st.t, 1u);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  Tensor x = Tensor::vector({0.0, 0.0});
  std::vector<NamedTensor> params = {{"x", &x}};
  const AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
  AdamState st = make_adam_state({{"x", &x}}, cfg);
  Gradients g;
  g.tensors = {Tensor::vector({0.3, -2.0})};
  double prev0 = 0.0, prev1 = 0.0;
  double m = 0.0, v = 0.0, oracle = 0.0;
  for (int t = 1; t <= 1000; ++t) {
    adam_step(params, g, st);
    m = 0.9 * m + 0.1 * 0.3;
    v = 0.999 * v + 0.001 * 0.09;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    oracle -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(x[0], oracle, 1e-12);
    if (t == 1000) {
      EXPECT_NEAR(prev0 - x[0], 0.01, 0.01 * 0.01);
      EXPECT_NEAR(x[1] - prev1, 0.01, 0.01 * 0.01);
    }
    prev0 = x[0];
    prev1 = x[1];
  }
}

TEST(Adam, ProjectionClampsLiquidWeights) {
  Model m = build_model(tiny_config());
  AdamConfig cfg;
  cfg.lr = 10.0;
  AdamState st = make_adam_state(named_parameters(std::as_const(m)), cfg);
  Gradients g = zero_gradients(m);
  const auto names = named_parameters(m);
  for (std::size_t p = 0; p < names.size(); ++p) {
    if (names[p].name == "liquid.w_rec" || names[p].name == "liquid.tau") g.tensors[p].fill(1.0);
  }
  adam_update(m, g, st);
  for (double w : m.liquid.w_rec.values()) EXPECT_EQ(w, 0.0);
  for (double t : m.liquid.tau.values()) EXPECT_EQ(t, kTauMin);
}

TEST(Adam, NonFiniteGradientRejectedBeforeAnyUpdate) {
  Model m = build_model(tiny_config());
  const Model before = m;
  AdamState st = make_adam_state(named_parameters(std::as_const(m)), AdamConfig{});
  Gradients g = zero_gradients(m);
  g.tensors.front().fill(1.0);
  g.tensors.back()[0] = std::nan("");
  try {
    adam_update(m, g, st);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("head.b"), std::string::npos);
  }
  EXPECT_EQ(m, before);
}

TEST(Train, ZeroLearningRateKeepsParametersAndLoss) {
  const Model m = build_model(tiny_config());
  const Dataset data = tiny_images(1, 4).select({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.adam.lr = 0.0;
  const TrainResult r = train(m, data, data, cfg);
  EXPECT_EQ(r.model, m);
  double initial = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    initial += softmax_cross_entropy(forward(m, data.image(i)).logits, data.labels[i]).loss;
  }
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_NEAR(r.log[0].train_loss, initial / 10.0, 1e-12);
}

TEST(Train, ReproducibleAndThreadIndependent) {
  const Dataset tr = tiny_images(2, 10);
  const Dataset va = tiny_images(3, 4);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  const TrainResult a = train(build_model(tiny_config()), tr, va, cfg);
  const TrainResult b = train(build_model(tiny_config()), tr, va, cfg);
  cfg.threads = 3;
  const TrainResult c = train(build_model(tiny_config()), tr, va, cfg);
  EXPECT_TRUE(same_metrics(a.log, b.log));
  EXPECT_TRUE(same_metrics(a.log, c.log));
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.model, c.model);
}

TEST(Train, CheckpointHoldsBestValidationModel) {
  const auto dir = std::filesystem::temp_directory_path() / "lnn_train_ckpt";
  std::filesystem::create_directories(dir);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.checkpoint_path = (dir / "best.lnnm").string();
  cfg.log_path = (dir / "metrics.csv").string();
  const TrainResult r = train(build_model(tiny_config()), tiny_images(4, 10), tiny_images(5, 4), cfg);
  EXPECT_EQ(load_model(cfg.checkpoint_path), r.model);
  double best = -1.0;
  for (const EpochMetrics& e : r.log) best = std::max(best, e.val_acc);
  EXPECT_EQ(r.log[r.best_epoch - 1].val_acc, best);
  EXPECT_TRUE(std::filesystem::exists(cfg.log_path));
  std::filesystem::remove_all(dir);
}

TEST(Train, MetricsCsvHeader) {
  const std::string csv = metrics_csv({EpochMetrics{1, 0.5, 0.25, 0.75, 0.1}});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,train_loss,train_acc,val_acc,seconds");
}

TEST(Evaluate, DominantBiasPredictsOneClass) {
  Model m = build_model(tiny_config());
  m.head_w.fill(0.0);
  m.head_b = Tensor::vector({0.0, 5.0, 0.0});
  const Dataset d = tiny_images(6, 5).select({0, 1, 2, 3, 4, 5, 6, 8, 9, 12});
  std::size_t ones = 0;
  for (std::size_t l : d.labels) ones += l == 1;
  const Evaluation e = evaluate(m, d);
  EXPECT_DOUBLE_EQ(e.accuracy, static_cast<double>(ones) / static_cast<double>(d.size()));
}

TEST(Evaluate, MatchesPerSampleLoopAndRowSums) {
  const Model m = build_model(tiny_config());
  const Dataset d = tiny_images(7, 34).select([] {
    std::vector<std::size_t> idx(100);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
  }());
  const Evaluation e = evaluate(m, d);
  std::size_t correct = 0;
  std::vector<std::size_t> per_class(3, 0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    correct += argmax(forward(m, d.image(i)).logits) == d.labels[i];
    ++per_class[d.labels[i]];
  }
  EXPECT_DOUBLE_EQ(e.accuracy, static_cast<double>(correct) / 100.0);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(std::accumulate(e.confusion[c].begin(), e.confusion[c].end(), std::size_t{0}), per_class[c]);
  }
  EXPECT_THROW(evaluate(m, d.select({})), ParameterError);
}

TEST(BatchGradient, MeanOfPerSampleGradients) {
  const Model m = build_model(tiny_config());
  const Dataset d = tiny_images(8, 2);
  const std::vector<std::size_t> idx = {0, 3, 5};
  const BatchGradient bg = batch_gradient(m, d, idx, 2);
  Gradients sum = zero_gradients(m);
  for (std::size_t i : idx) sum.add_scaled(backward(m, forward(m, d.image(i)), d.labels[i]).grads, 1.0 / 3.0);
  for (std::size_t p = 0; p < sum.tensors.size(); ++p) {
    for (std::size_t i = 0; i < sum.tensors[p].size(); ++i) {
      EXPECT_NEAR(bg.grads.tensors[p][i], sum.tensors[p][i], 1e-15);
    }
  }
}

TEST(SequenceTraining, ReachesHighAccuracyOnTemporalTask) {
  WiringSpec w{1, 3, 6, 3, 3, 3, 12, 0.3, 1};
  SequenceModel m = build_sequence_model(w, 2, 1.5, 2, 1, {0.5, 10.0, 0.01, 3.0, 6.0, 18.0, -6.0, 6.0, 0.5, 1.0});
  SynthConfig sc;
  sc.omega = 0.9;
  SequenceTrainConfig tc;
  tc.steps = 200;
  tc.batch_size = 32;
  tc.adam.lr = 0.03;
  tc.seed = 1;
  const auto losses = train_sequence_model(m, synth_sequences(101, 256, 32, sc), tc);
  EXPECT_EQ(losses.size(), 200u);
  EXPECT_GE(sequence_accuracy(m, synth_sequences(901, 400, 32, sc)), 0.9);
}

}  // namespace
}  // namespace lnn
