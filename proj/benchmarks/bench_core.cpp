#include <benchmark/benchmark.h>

#include "refdense/autograd.hpp"
#include "refdense/ops.hpp"
#include "refdense/random.hpp"

using namespace refdense;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, bool grad = false) {
  std::vector<double> vals(numel_of(shape));
  for (auto& v : vals) v = rng.normal(0.0, 0.5);
  return Tensor::from(std::move(shape), std::move(vals), grad);
}

void BM_matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  Tensor a = random_tensor(rng, {n, n});
  Tensor b = random_tensor(rng, {n, n});
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}
BENCHMARK(BM_matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_attention_forward(benchmark::State& state) {
  const int t = static_cast<int>(state.range(0));
  Rng rng(2);
  Tensor q = random_tensor(rng, {t, 64});
  Tensor k = random_tensor(rng, {t, 64});
  Tensor v = random_tensor(rng, {t, 64});
  for (auto _ : state) benchmark::DoNotOptimize(attention(q, k, v, 4));
}
BENCHMARK(BM_attention_forward)->Arg(64)->Arg(256);

void BM_attention_backward(benchmark::State& state) {
  const int t = static_cast<int>(state.range(0));
  Rng rng(3);
  Tensor q = random_tensor(rng, {t, 64}, true);
  Tensor k = random_tensor(rng, {t, 64}, true);
  Tensor v = random_tensor(rng, {t, 64}, true);
  for (auto _ : state) {
    Tensor loss = sum_all(attention(q, k, v, 4));
    benchmark::DoNotOptimize(backward(loss));
  }
}
BENCHMARK(BM_attention_backward)->Arg(64)->Arg(256);

void BM_conv1d(benchmark::State& state) {
  Rng rng(4);
  Tensor x = random_tensor(rng, {256, 64});
  Tensor k = random_tensor(rng, {3, 64, 64});
  for (auto _ : state) benchmark::DoNotOptimize(conv1d(x, k, 2));
}
BENCHMARK(BM_conv1d);

}  // namespace

BENCHMARK_MAIN();
