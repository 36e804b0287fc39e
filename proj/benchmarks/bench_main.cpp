#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "bodylift/metrics.hpp"
#include "bodylift/model.hpp"
#include "bodylift/ops.hpp"
#include "bodylift/skeleton.hpp"
#include "bodylift/synth.hpp"
#include "bodylift/trainer.hpp"

using namespace bodylift;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Tensor t(Shape{rows, cols});
  for (double& v : t.data()) v = normal(rng);
  return t;
}

void BM_LinearForwardBackward(benchmark::State& state) {
  const auto batch = std::size_t(state.range(0));
  const auto width = std::size_t(state.range(1));
  Rng rng = make_rng(1);
  ad::Parameter w("w", random_matrix(width, width, rng));
  ad::Parameter b("b", Tensor(Shape{width}));
  const Tensor x = random_matrix(batch, width, rng);
  for (auto _ : state) {
    auto y = ad::sum(ad::linear(ad::constant(x), ad::param(w), ad::param(b)));
    y.backward();
    benchmark::DoNotOptimize(w.grad.raw());
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(batch));
}
BENCHMARK(BM_LinearForwardBackward)->Args({64, 256})->Args({64, 1024});

void BM_Predict(benchmark::State& state) {
  net::ModelSpec spec;
  spec.width = std::size_t(state.range(0));
  Rng rng = make_rng(2);
  auto model = net::build_model(spec, rng);
  const Tensor x = random_matrix(64, spec.input2d(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(net::predict(model, x));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_Predict)->Arg(256)->Arg(1024);

void BM_TrainStep(benchmark::State& state) {
  const bool semi = state.range(1) != 0;
  net::ModelSpec spec;
  spec.width = std::size_t(state.range(0));
  Rng rng = make_rng(3);
  auto model = net::build_model(spec, rng);
  train::TrainConfig config;
  config.width = spec.width;
  config.mode = semi ? train::TrainMode::Semi : train::TrainMode::Supervised;
  train::Trainer trainer(model, config);
  train::Batch batch{random_matrix(64, spec.input2d(), rng), random_matrix(64, spec.input3d(), rng)};
  const Tensor unlabeled = random_matrix(64, spec.input2d(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step(batch, semi ? &unlabeled : nullptr));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_TrainStep)->Args({256, 0})->Args({256, 1})->Unit(benchmark::kMillisecond);

void BM_ProcrustesAlign(benchmark::State& state) {
  Rng rng = make_rng(4);
  const auto data = synth_dataset(Skeleton::h36m16(), 2, rng);
  const Pose3D& a = *data[0].pose3d;
  const Pose3D& b = *data[1].pose3d;
  for (auto _ : state) benchmark::DoNotOptimize(metrics::procrustes_align(a, b));
}
BENCHMARK(BM_ProcrustesAlign);

}  // namespace
BENCHMARK_MAIN();
