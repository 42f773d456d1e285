#include <benchmark/benchmark.h>

#include <vector>

#include "signbench/attacks.hpp"
#include "signbench/layers.hpp"
#include "signbench/mcda.hpp"
#include "signbench/network.hpp"
#include "signbench/rng.hpp"

using namespace signbench;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  SplitMix64 rng(seed);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

void BM_ConvForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto s = static_cast<std::size_t>(state.range(1));
  const Tensor x = random_tensor({8, c, s, s}, 1), k = random_tensor({2 * c, c, 3, 3}, 2), b = random_tensor({2 * c}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_forward(x, k, b));
}
BENCHMARK(BM_ConvForward)->Args({3, 64})->Args({8, 32})->Args({16, 16});

void BM_ConvBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto s = static_cast<std::size_t>(state.range(1));
  const Tensor x = random_tensor({8, c, s, s}, 1), k = random_tensor({2 * c, c, 3, 3}, 2);
  const Tensor up = random_tensor({8, 2 * c, s, s}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_backward(x, k, up));
}
BENCHMARK(BM_ConvBackward)->Args({3, 64})->Args({8, 32})->Args({16, 16});

void BM_TrainStep(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  NetworkSpec spec;
  NetworkParams params = init_params(spec, 7);
  const Tensor x = random_tensor({batch, 3, 64, 64}, 5, 0.0, 1.0);
  std::vector<int> labels(batch);
  for (std::size_t i = 0; i < batch; ++i) labels[i] = static_cast<int>(i % kNumClasses);
  for (auto _ : state) {
    const auto lg = loss_and_gradients(spec, params, x, labels);
    sgd_step(params, lg.grads, 0.01);
    benchmark::DoNotOptimize(params);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Attack(benchmark::State& state) {
  const auto kind = static_cast<AttackKind>(state.range(0));
  const Tensor img = random_tensor({3, 64, 64}, 9, 0.0, 1.0);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    AttackSpec spec{kind, ++seed, 0.3, std::nullopt, 0.6};
    benchmark::DoNotOptimize(apply_attack(img, spec));
  }
  state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_Attack)->DenseRange(0, 2);

void BM_Rank(benchmark::State& state) {
  std::vector<mcda::CriteriaRecord> cohort;
  SplitMix64 rng(3);
  for (int i = 0; i < state.range(0); ++i) {
    cohort.push_back({"alg" + std::to_string(i), rng.uniform(0.01, 5), rng.uniform(0.1, 1), rng.uniform(0, 1)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(mcda::rank(cohort));
}
BENCHMARK(BM_Rank)->Arg(6)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
