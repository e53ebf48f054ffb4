#include <benchmark/benchmark.h>

#include "jaclab/kinematics.hpp"
#include "jaclab/rng.hpp"

namespace {

std::vector<double> random_q(std::size_t n, std::uint64_t seed) {
  jaclab::Rng rng(seed);
  std::vector<double> q(n);
  for (double& v : q) v = rng.uniform(-3.14, 3.14);
  return q;
}

void BM_ForwardKinematics(benchmark::State& state) {
  const jaclab::DhChain chain = jaclab::kinova_chain();
  const auto q = random_q(7, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(jaclab::forward_kinematics(chain, q));
  }
}
BENCHMARK(BM_ForwardKinematics);

void BM_TrueJacobianSingle(benchmark::State& state) {
  const jaclab::DhChain chain = jaclab::kinova_chain();
  const jaclab::PointSet pts = jaclab::PointSet::single();
  const auto q = random_q(7, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(jaclab::true_jacobian(chain, q, pts));
  }
}
BENCHMARK(BM_TrueJacobianSingle);

void BM_TrueJacobianMulti(benchmark::State& state) {
  const jaclab::DhChain chain = jaclab::kinova_chain();
  const jaclab::PointSet pts = jaclab::PointSet::multi();
  const auto q = random_q(7, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(jaclab::true_jacobian(chain, q, pts));
  }
}
BENCHMARK(BM_TrueJacobianMulti);

void BM_PlanarJacobian(benchmark::State& state) {
  const jaclab::PlanarArm2 arm;
  const auto q = random_q(2, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(jaclab::planar_jacobian(arm, q[0], q[1]));
  }
}
BENCHMARK(BM_PlanarJacobian);

}  // namespace

BENCHMARK_MAIN();
