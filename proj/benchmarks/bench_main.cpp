#include <benchmark/benchmark.h>

#include "batchlab/rng.hpp"
#include "batchlab/tensor.hpp"

namespace {

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  batchlab::Rng rng(7);
  auto a = batchlab::gaussian(rng, {n, n}, 0.0, 1.0);
  auto b = batchlab::gaussian(rng, {n, n}, 0.0, 1.0);
  for (auto _ : state) {
    auto c = batchlab::matmul(a, b);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
