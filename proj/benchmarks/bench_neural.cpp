#include <benchmark/benchmark.h>

#include "jaclab/neural.hpp"
#include "jaclab/rng.hpp"

namespace {

jaclab::Mlp deployment_net(std::size_t out) {
  jaclab::MlpSpec spec;
  spec.input_dim = 14;
  spec.hidden_layers = 2;
  spec.hidden_width = 100;
  spec.output_dim = out;
  spec.activation = jaclab::Activation::Tanh;
  spec.seed = 1;
  return jaclab::make_mlp(spec);
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  jaclab::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void BM_Forward(benchmark::State& state) {
  const jaclab::Mlp mlp = deployment_net(3);
  const auto x = random_vec(14, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(jaclab::forward(mlp, x));
  }
}
BENCHMARK(BM_Forward);

void BM_InputJacobian(benchmark::State& state) {
  const jaclab::Mlp mlp = deployment_net(3);
  const auto x = random_vec(14, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(jaclab::input_jacobian(mlp, x));
  }
}
BENCHMARK(BM_InputJacobian);

void BM_MseBackpropBatch32(benchmark::State& state) {
  const jaclab::Mlp mlp = deployment_net(3);
  std::vector<std::vector<double>> inputs, targets;
  for (int i = 0; i < 32; ++i) {
    inputs.push_back(random_vec(14, 100 + i));
    targets.push_back(random_vec(3, 200 + i));
  }
  for (auto _ : state) {
    jaclab::MlpGrads grads = jaclab::MlpGrads::zeros_like(mlp);
    benchmark::DoNotOptimize(
        jaclab::mse_backprop(mlp, inputs, targets, 0.0, grads));
  }
}
BENCHMARK(BM_MseBackpropBatch32);

void BM_HyperplaneLossGrad(benchmark::State& state) {
  const double beta = static_cast<double>(state.range(0));
  jaclab::Rng rng(7);
  jaclab::Mat j(3, 7);
  for (double& v : j.data()) v = rng.uniform(-1.0, 1.0);
  std::vector<jaclab::FiniteDiffPair> pairs;
  for (int i = 0; i < 90; ++i) {  // k = 10 neighborhood
    pairs.push_back({random_vec(3, 300 + i), random_vec(7, 400 + i)});
  }
  for (auto _ : state) {
    jaclab::Mat grad;
    benchmark::DoNotOptimize(
        jaclab::hyperplane_loss_and_grad(j, pairs, beta, grad));
  }
}
BENCHMARK(BM_HyperplaneLossGrad)->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();
