#include <benchmark/benchmark.h>

#include "jaclab/collection.hpp"
#include "jaclab/control.hpp"
#include "jaclab/estimators.hpp"

namespace {

void BM_ControlStepMulti(benchmark::State& state) {
  const jaclab::EnvModel model =
      jaclab::EnvModel::make(jaclab::EnvKind::MultiPoint7);
  jaclab::Rng rng(1);
  std::vector<double> q(7);
  for (double& v : q) v = rng.uniform(-1.0, 1.0);
  const jaclab::Mat j = model.jacobian(q);
  const auto x = model.features(q);
  std::vector<double> x_star = x;
  for (double& v : x_star) v += 0.1;
  const jaclab::ControllerConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(jaclab::control_step(j, x, x_star, cfg));
  }
}
BENCHMARK(BM_ControlStepMulti);

void BM_TrajectoryTruePlanar(benchmark::State& state) {
  jaclab::Environment env(jaclab::EnvModel::make(jaclab::EnvKind::Planar2),
                          jaclab::SimConfig{});
  const auto target = env.model().features({0.7, 0.9});
  for (auto _ : state) {
    jaclab::TrueJacobianEstimator est(env.model());
    jaclab::ControllerConfig cfg;
    benchmark::DoNotOptimize(jaclab::run_trajectory(env, est, target, cfg));
  }
}
BENCHMARK(BM_TrajectoryTruePlanar);

void BM_LlknnEstimate(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  jaclab::Environment env(
      jaclab::EnvModel::make(jaclab::EnvKind::SinglePoint7),
      jaclab::SimConfig{});
  const jaclab::Dataset data =
      jaclab::collect(env, 100, 100, jaclab::OuConfig{}, 0);
  jaclab::Rng rng(2);
  std::vector<double> q(7);
  for (double& v : q) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(jaclab::llknn_estimate(data, q, k));
  }
}
BENCHMARK(BM_LlknnEstimate)->Arg(10)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
