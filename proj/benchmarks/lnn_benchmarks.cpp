#include <benchmark/benchmark.h>

#include "lnn/deploy.hpp"
#include "lnn/frontend.hpp"
#include "lnn/ltc_cell.hpp"
#include "lnn/model.hpp"
#include "lnn/quantize.hpp"
#include "lnn/rng.hpp"

namespace {

using namespace lnn;

Tensor random_image(std::size_t side, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({3, side, side});
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

void BM_FusedStep(benchmark::State& state) {
  const Model m = build_model(ModelConfig{});
  LiquidState x{std::vector<double>(m.liquid.n_neurons, 0.1)};
  const std::vector<double> u(m.liquid.n_inputs, 0.5);
  for (auto _ : state) {
    x = fused_step(x, u, m.liquid, m.dt);
    benchmark::DoNotOptimize(x.x.data());
  }
}
BENCHMARK(BM_FusedStep);

void BM_ConvFrontend(benchmark::State& state) {
  const Model m = build_model(ModelConfig{});
  const Tensor image = random_image(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(extract_features(m, image));
}
BENCHMARK(BM_ConvFrontend)->Arg(16)->Arg(32);

void BM_ForwardBackward(benchmark::State& state) {
  const Model m = build_model(ModelConfig{});
  const Tensor image = random_image(16, 2);
  for (auto _ : state) {
    const ForwardCache cache = forward(m, image);
    benchmark::DoNotOptimize(backward(m, cache, 1).loss);
  }
}
BENCHMARK(BM_ForwardBackward);

void BM_FixedPointFrame(benchmark::State& state) {
  const Model m = build_model(ModelConfig{});
  const QuantModel q = quantize_model(m, {random_image(16, 3), random_image(16, 4)}, ChipSpec{});
  const FixedPointEngine engine(compile(q, ChipSpec{}), q);
  const Tensor image = random_image(16, 5);
  for (auto _ : state) benchmark::DoNotOptimize(engine.run(image).logits);
}
BENCHMARK(BM_FixedPointFrame);

}  // namespace

BENCHMARK_MAIN();
