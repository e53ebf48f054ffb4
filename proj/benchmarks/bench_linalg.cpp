#include <benchmark/benchmark.h>

#include "jaclab/linalg.hpp"
#include "jaclab/rng.hpp"

namespace {

jaclab::Mat random_mat(std::size_t r, std::size_t c, std::uint64_t seed) {
  jaclab::Rng rng(seed);
  jaclab::Mat m(r, c);
  for (double& v : m.data()) v = rng.uniform(-1.0, 1.0);
  return m;
}

void BM_Svd12x7(benchmark::State& state) {
  const jaclab::Mat a = random_mat(12, 7, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(jaclab::svd(a));
  }
}
BENCHMARK(BM_Svd12x7);

void BM_Pinv12x7(benchmark::State& state) {
  const jaclab::Mat a = random_mat(12, 7, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(jaclab::pinv(a));
  }
}
BENCHMARK(BM_Pinv12x7);

void BM_PinvDirectionalDerivative(benchmark::State& state) {
  const jaclab::Mat j = random_mat(3, 7, 3);
  const jaclab::Mat dj = random_mat(3, 7, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(jaclab::pinv_directional_derivative(j, dj));
  }
}
BENCHMARK(BM_PinvDirectionalDerivative);

void BM_SymmetricEigen7(benchmark::State& state) {
  const jaclab::Mat a = random_mat(7, 7, 5);
  const jaclab::Mat s = a * a.transposed();
  for (auto _ : state) {
    benchmark::DoNotOptimize(jaclab::symmetric_eigenvalues(s));
  }
}
BENCHMARK(BM_SymmetricEigen7);

}  // namespace

BENCHMARK_MAIN();
