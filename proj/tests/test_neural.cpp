#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "jaclab/collection.hpp"
#include "jaclab/environments.hpp"
#include "jaclab/neural.hpp"
#include "test_util.hpp"

using jaclab::Activation;
using jaclab::AdamState;
using jaclab::FiniteDiffPair;
using jaclab::InputEmbedding;
using jaclab::Mat;
using jaclab::Mlp;
using jaclab::MlpGrads;
using jaclab::MlpSpec;
using jaclab::PairSet;
using jaclab::Rng;
using jaclab::TrainConfig;
using testutil::max_abs_diff;
using testutil::random_vec;

namespace {

MlpSpec spec_of(std::size_t in, std::size_t hidden, std::size_t width,
                std::size_t out, Activation act, std::uint64_t seed) {
  MlpSpec s;
  s.input_dim = in;
  s.hidden_layers = hidden;
  s.hidden_width = width;
  s.output_dim = out;
  s.activation = act;
  s.seed = seed;
  return s;
}

// Loss as a function of one flattened parameter vector, for finite-diff
// gradient checks.
std::vector<double*> parameter_pointers(Mlp& mlp) {
  std::vector<double*> ptrs;
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    for (double& v : mlp.weights[l].data()) ptrs.push_back(&v);
    for (double& v : mlp.biases[l]) ptrs.push_back(&v);
  }
  return ptrs;
}

std::vector<double> flatten_grads(const MlpGrads& g) {
  std::vector<double> out;
  for (std::size_t l = 0; l < g.w.size(); ++l) {
    out.insert(out.end(), g.w[l].data().begin(), g.w[l].data().end());
    out.insert(out.end(), g.b[l].begin(), g.b[l].end());
  }
  return out;
}

bool mlp_equal(const Mlp& a, const Mlp& b) {
  if (a.layer_count() != b.layer_count()) return false;
  for (std::size_t l = 0; l < a.layer_count(); ++l) {
    if (!(a.weights[l] == b.weights[l])) return false;
    if (a.biases[l] != b.biases[l]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("forward of a pure linear net is W x") {
  MlpSpec s = spec_of(3, 0, 0, 2, Activation::Tanh, 1);
  s.hidden_width = 100;  // unused with zero hidden layers
  Mlp mlp = jaclab::make_mlp(s);
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const auto x = random_vec(3, rng);
    CHECK(jaclab::forward(mlp, x) == mlp.weights[0].mul_vec(x));
  }
}

TEST_CASE("tanh net with zero parameters maps everything to zero") {
  Mlp mlp = jaclab::make_mlp(spec_of(4, 2, 8, 3, Activation::Tanh, 0));
  for (auto& w : mlp.weights)
    for (double& v : w.data()) v = 0.0;
  Rng rng(6);
  const auto y = jaclab::forward(mlp, random_vec(4, rng));
  CHECK(y == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("seeded construction and forward are bit-identical across runs") {
  const MlpSpec s = spec_of(5, 2, 16, 4, Activation::Tanh, 9001);
  const Mlp a = jaclab::make_mlp(s);
  const Mlp b = jaclab::make_mlp(s);
  CHECK(mlp_equal(a, b));
  Rng rng(3);
  const auto x = random_vec(5, rng);
  CHECK(jaclab::forward(a, x) == jaclab::forward(b, x));
}

TEST_CASE("input_jacobian of a linear net is W") {
  const Mlp mlp = jaclab::make_mlp(spec_of(4, 0, 0, 3, Activation::Relu, 2));
  Rng rng(7);
  CHECK(max_abs_diff(jaclab::input_jacobian(mlp, random_vec(4, rng)),
                     mlp.weights[0]) == 0.0);
}

TEST_CASE("input_jacobian of a zero-bias tanh net at zero input is W2 W1") {
  const Mlp mlp = jaclab::make_mlp(spec_of(3, 1, 6, 2, Activation::Tanh, 4));
  const Mat j = jaclab::input_jacobian(mlp, {0.0, 0.0, 0.0});
  CHECK(max_abs_diff(j, mlp.weights[1] * mlp.weights[0]) < 1e-15);
}

TEST_CASE("input_jacobian matches finite differences") {
  Rng rng(11);
  SUBCASE("tanh everywhere") {
    for (int rep = 0; rep < 5; ++rep) {
      const Mlp mlp = jaclab::make_mlp(
          spec_of(6, 2, 24, 5, Activation::Tanh, 100 + rep));
      const auto x = random_vec(6, rng);
      const Mat j = jaclab::input_jacobian(mlp, x);
      const Mat fd = testutil::central_difference_jacobian(
          [&](const std::vector<double>& xx) { return jaclab::forward(mlp, xx); },
          x, 1e-5);
      CHECK(testutil::rel_error(j, fd) < 1e-4);
    }
  }
  SUBCASE("relu away from kinks") {
    for (int rep = 0; rep < 5; ++rep) {
      const Mlp mlp = jaclab::make_mlp(
          spec_of(6, 2, 24, 5, Activation::Relu, 200 + rep));
      std::vector<double> x;
      for (;;) {
        x = random_vec(6, rng);
        // Keep only inputs where no preactivation sits near a relu kink.
        std::vector<double> h = x;
        bool safe = true;
        for (std::size_t l = 0; l + 1 < mlp.layer_count(); ++l) {
          auto pre = mlp.weights[l].mul_vec(h);
          for (std::size_t i = 0; i < pre.size(); ++i) {
            pre[i] += mlp.biases[l][i];
            if (std::abs(pre[i]) < 1e-3) safe = false;
          }
          h.assign(pre.size(), 0.0);
          for (std::size_t i = 0; i < pre.size(); ++i)
            h[i] = pre[i] > 0 ? pre[i] : 0.0;
        }
        if (safe) break;
      }
      const Mat j = jaclab::input_jacobian(mlp, x);
      const Mat fd = testutil::central_difference_jacobian(
          [&](const std::vector<double>& xx) { return jaclab::forward(mlp, xx); },
          x, 1e-5);
      CHECK(testutil::rel_error(j, fd) < 1e-4);
    }
  }
}

TEST_CASE("mse_backprop hand-checked cases") {
  // Perfect predictions: zero loss, zero gradient.
  Mlp lin = jaclab::make_mlp(spec_of(1, 0, 0, 1, Activation::Tanh, 0));
  lin.weights[0](0, 0) = 2.0;
  lin.biases[0][0] = 0.0;
  MlpGrads g = MlpGrads::zeros_like(lin);
  const double perfect =
      jaclab::mse_backprop(lin, {{1.0}}, {{2.0}}, 0.0, g);
  CHECK(perfect == 0.0);
  CHECK(g.w[0].max_abs() == 0.0);
  CHECK(g.b[0][0] == 0.0);

  // y = w x with w = 2 on the pair (1, 0): loss (2-0)^2 = 4, dL/dw = 4.
  g = MlpGrads::zeros_like(lin);
  const double loss = jaclab::mse_backprop(lin, {{1.0}}, {{0.0}}, 0.0, g);
  CHECK(loss == doctest::Approx(4.0));
  CHECK(g.w[0](0, 0) == doctest::Approx(4.0));
}

TEST_CASE("mse_backprop gradients match finite differences") {
  Rng rng(21);
  for (const Activation act : {Activation::Tanh, Activation::Relu}) {
    Mlp mlp = jaclab::make_mlp(spec_of(4, 2, 10, 3, act, 31));
    std::vector<std::vector<double>> inputs, targets;
    for (int i = 0; i < 7; ++i) {
      inputs.push_back(random_vec(4, rng));
      targets.push_back(random_vec(3, rng));
    }
    MlpGrads g = MlpGrads::zeros_like(mlp);
    jaclab::mse_backprop(mlp, inputs, targets, 1e-3, g);
    const std::vector<double> analytic = flatten_grads(g);

    const auto ptrs = parameter_pointers(mlp);
    const double h = 1e-6;
    for (std::size_t i = 0; i < ptrs.size(); i += 7) {  // spot-check subset
      const double orig = *ptrs[i];
      auto loss_with_decay = [&]() {
        MlpGrads scratch = MlpGrads::zeros_like(mlp);
        double l = jaclab::mse_backprop(mlp, inputs, targets, 0.0, scratch);
        // add the decay penalty 0.5 * wd * |W|^2 per weight matrix, the
        // potential whose gradient is wd * W
        double reg = 0.0;
        for (const auto& w : mlp.weights)
          for (double v : w.data()) reg += 0.5 * 1e-3 * v * v;
        return l + reg;
      };
      *ptrs[i] = orig + h;
      const double lp = loss_with_decay();
      *ptrs[i] = orig - h;
      const double lm = loss_with_decay();
      *ptrs[i] = orig;
      const double fd = (lp - lm) / (2.0 * h);
      CHECK(std::abs(analytic[i] - fd) <
            1e-4 * std::max(1.0, std::abs(analytic[i])));
    }
  }
}

TEST_CASE("adam_step basics") {
  // Zero gradient leaves parameters untouched.
  Mlp mlp = jaclab::make_mlp(spec_of(2, 1, 4, 2, Activation::Tanh, 3));
  const Mlp before = mlp;
  AdamState st = AdamState::zeros_like(mlp);
  TrainConfig cfg;
  jaclab::adam_step(mlp, MlpGrads::zeros_like(mlp), st, cfg);
  CHECK(mlp_equal(mlp, before));

  // Scalar parameter, unit gradient, first step: update is -lr to 1e-6.
  Mlp scalar = jaclab::make_mlp(spec_of(1, 0, 0, 1, Activation::Tanh, 0));
  scalar.weights[0](0, 0) = 0.5;
  AdamState st2 = AdamState::zeros_like(scalar);
  MlpGrads g = MlpGrads::zeros_like(scalar);
  g.w[0](0, 0) = 1.0;
  jaclab::adam_step(scalar, g, st2, cfg);
  CHECK(std::abs(scalar.weights[0](0, 0) - (0.5 - cfg.learning_rate)) < 1e-6);

  // Identical runs are bit-identical.
  Mlp a = jaclab::make_mlp(spec_of(2, 1, 4, 2, Activation::Tanh, 8));
  Mlp b = a;
  AdamState sa = AdamState::zeros_like(a), sb = AdamState::zeros_like(b);
  Rng rng(12);
  for (int t = 0; t < 20; ++t) {
    MlpGrads gg = MlpGrads::zeros_like(a);
    for (auto& w : gg.w)
      for (double& v : w.data()) v = rng.uniform(-1, 1);
    jaclab::adam_step(a, gg, sa, cfg);
    jaclab::adam_step(b, gg, sb, cfg);
  }
  CHECK(mlp_equal(a, b));
}

TEST_CASE("hyperplane loss: exact fit and hand gradient") {
  const Mat a({{1.0, -2.0}, {0.5, 3.0}});
  Rng rng(41);
  std::vector<FiniteDiffPair> pairs;
  for (int i = 0; i < 12; ++i) {
    FiniteDiffPair p;
    p.dq = random_vec(2, rng);
    p.dx = a.mul_vec(p.dq);
    pairs.push_back(std::move(p));
  }
  CHECK(jaclab::hyperplane_loss(a, pairs, 0.0) < 1e-24);
  CHECK(jaclab::hyperplane_loss(a, pairs, 1.0) < 1e-24);

  // Single pair dq = (1,0), dx = (0,0) at J = I: loss 1, grad [[2,0],[0,0]].
  std::vector<FiniteDiffPair> one = {{{0.0, 0.0}, {1.0, 0.0}}};
  Mat grad;
  const double loss =
      jaclab::hyperplane_loss_and_grad(Mat::identity(2), one, 0.0, grad);
  CHECK(loss == doctest::Approx(1.0));
  CHECK(max_abs_diff(grad, Mat({{2.0, 0.0}, {0.0, 0.0}})) < 1e-14);
}

TEST_CASE("hyperplane gradient matches finite differences with beta") {
  Rng rng(51);
  for (const double beta : {0.0, 0.3, 1.0}) {
    for (int rep = 0; rep < 6; ++rep) {
      const std::size_t m = 2 + rep % 2, n = 3;
      const Mat j = testutil::random_well_conditioned(m, n, rng, 10.0);
      std::vector<FiniteDiffPair> pairs;
      for (int i = 0; i < 8; ++i) {
        pairs.push_back({random_vec(m, rng), random_vec(n, rng)});
      }
      Mat analytic;
      jaclab::hyperplane_loss_and_grad(j, pairs, beta, analytic);

      Mat fd(m, n);
      const double h = 1e-6;
      Mat jp = j;
      for (std::size_t idx = 0; idx < j.data().size(); ++idx) {
        const double orig = jp.data()[idx];
        jp.data()[idx] = orig + h;
        const double lp = jaclab::hyperplane_loss(jp, pairs, beta);
        jp.data()[idx] = orig - h;
        const double lm = jaclab::hyperplane_loss(jp, pairs, beta);
        jp.data()[idx] = orig;
        fd.data()[idx] = (lp - lm) / (2.0 * h);
      }
      CHECK(testutil::rel_error(analytic, fd) < 1e-4);
    }
  }
}

TEST_CASE("beta-term gradient agrees with per-entry pinv derivatives") {
  // Independent assembly route: contract the directional derivative of the
  // pseudo-inverse entry by entry instead of through the adjoint identity.
  Rng rng(61);
  const std::size_t m = 3, n = 4;
  const Mat j = testutil::random_well_conditioned(m, n, rng, 10.0);
  std::vector<FiniteDiffPair> pairs;
  for (int i = 0; i < 5; ++i)
    pairs.push_back({random_vec(m, rng), random_vec(n, rng)});

  Mat adjoint;
  jaclab::hyperplane_loss_and_grad(j, pairs, 1.0, adjoint);
  // Remove the forward-term part to isolate the beta contribution.
  Mat fwd;
  jaclab::hyperplane_loss_and_grad(j, pairs, 0.0, fwd);
  const Mat beta_adjoint = adjoint - fwd;

  const Mat pj = jaclab::pinv(j);
  Mat per_entry(m, n);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      Mat e(m, n);
      e(r, c) = 1.0;
      const Mat dp = jaclab::pinv_directional_derivative(j, e);
      double acc = 0.0;
      for (const auto& p : pairs) {
        const auto s = jaclab::vec_sub(p.dq, pj.mul_vec(p.dx));
        acc += -2.0 * jaclab::vec_dot(s, dp.mul_vec(p.dx));
      }
      per_entry(r, c) = acc;
    }
  }
  CHECK(testutil::rel_error(beta_adjoint, per_entry) < 1e-9);
}

TEST_CASE("hyperplane beta gradient needs full rank") {
  Rng rng(71);
  const Mat j = testutil::random_rank_deficient(3, 4, 1, rng);
  std::vector<FiniteDiffPair> pairs = {
      {random_vec(3, rng), random_vec(4, rng)},
      {random_vec(3, rng), random_vec(4, rng)}};
  Mat grad;
  CHECK_THROWS_AS(jaclab::hyperplane_loss_and_grad(j, pairs, 1.0, grad),
                  jaclab::RankError);
  // Loss evaluation itself survives rank deficiency.
  CHECK(std::isfinite(jaclab::hyperplane_loss(j, pairs, 1.0)));
}

TEST_CASE("train_neural_kinematics fits an exact linear map") {
  const Mat a({{0.5, -1.0, 0.25}, {2.0, 0.0, -0.75}});
  Rng rng(81);
  std::vector<std::vector<double>> inputs, targets;
  for (int i = 0; i < 400; ++i) {
    inputs.push_back(random_vec(3, rng));
    targets.push_back(a.mul_vec(inputs.back()));
  }
  MlpSpec spec = spec_of(3, 0, 0, 2, Activation::Tanh, 13);
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.learning_rate = 0.01;  // tiny model, generous step budget
  cfg.seed = 13;
  const auto result = jaclab::train_neural_kinematics(inputs, targets, spec, cfg);
  CHECK(result.best_val_loss < 1e-6);
  CHECK(max_abs_diff(result.model.weights[0], a) < 1e-2);
}

TEST_CASE("train_neural_kinematics with zero epochs returns initialization") {
  Rng rng(91);
  std::vector<std::vector<double>> inputs, targets;
  for (int i = 0; i < 10; ++i) {
    inputs.push_back(random_vec(2, rng));
    targets.push_back(random_vec(1, rng));
  }
  const MlpSpec spec = spec_of(2, 1, 4, 1, Activation::Tanh, 5);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 5;
  const auto result = jaclab::train_neural_kinematics(inputs, targets, spec, cfg);
  CHECK(mlp_equal(result.model, jaclab::make_mlp(spec)));
  CHECK(result.log.empty());
}

TEST_CASE("training selects the best validation snapshot deterministically") {
  Rng rng(101);
  std::vector<std::vector<double>> inputs, targets;
  for (int i = 0; i < 120; ++i) {
    const auto x = random_vec(2, rng);
    inputs.push_back(x);
    targets.push_back({std::sin(x[0]) * 0.3 + x[1] * 0.5});
  }
  MlpSpec spec = spec_of(2, 1, 16, 1, Activation::Tanh, 7);
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.seed = 7;
  const auto r1 = jaclab::train_neural_kinematics(inputs, targets, spec, cfg);
  const auto r2 = jaclab::train_neural_kinematics(inputs, targets, spec, cfg);
  CHECK(mlp_equal(r1.model, r2.model));  // bit-identical reruns
  REQUIRE(!r1.log.empty());
  CHECK(r1.best_val_loss <= r1.log.back().val_loss);
  for (std::size_t i = 0; i < r1.log.size(); ++i) {
    CHECK(r1.log[i].val_loss == r2.log[i].val_loss);
  }

  // Weight decay actually changes the run.
  TrainConfig decayed = cfg;
  decayed.weight_decay = 1e-3;
  const auto r3 = jaclab::train_neural_kinematics(inputs, targets, spec, decayed);
  CHECK_FALSE(mlp_equal(r1.model, r3.model));
}

TEST_CASE("train_neural_jacobian learns a constant Jacobian") {
  // Anchors generated from the exact linear map x = A q.
  const Mat a({{1.0, 2.0}, {3.0, 4.0}});
  Rng rng(111);
  jaclab::Dataset data;
  data.kind = jaclab::EnvKind::Planar2;
  for (int i = 0; i < 300; ++i) {
    jaclab::DatasetSample s;
    s.trajectory = 0;
    s.step = static_cast<std::uint32_t>(i);
    s.q = random_vec(2, rng);
    s.x = a.mul_vec(s.q);
    data.samples.push_back(std::move(s));
  }
  const PairSet pairs = jaclab::build_pairs(data, 10);

  MlpSpec spec = spec_of(4, 1, 8, 4, Activation::Tanh, 17);
  TrainConfig cfg;
  cfg.epochs = 900;
  cfg.learning_rate = 0.01;
  cfg.seed = 17;
  const auto result = jaclab::train_neural_jacobian(
      pairs, spec, cfg, 0.0, InputEmbedding::TrigCosSin);

  // Held-out configurations: the net must output A everywhere in range.
  for (int rep = 0; rep < 20; ++rep) {
    const auto q = random_vec(2, rng);
    const auto y = jaclab::forward(
        result.model, jaclab::embed_input(InputEmbedding::TrigCosSin, q));
    const Mat j(2, 2, y);
    CHECK((j - a).frobenius() < 1e-2);
  }
}

TEST_CASE("beta = 0 and beta = 1 produce different trained parameters") {
  const Mat a({{0.8, -0.3}, {0.2, 1.1}});
  Rng rng(121);
  jaclab::Dataset data;
  data.kind = jaclab::EnvKind::Planar2;
  for (int i = 0; i < 80; ++i) {
    jaclab::DatasetSample s;
    s.trajectory = 0;
    s.step = static_cast<std::uint32_t>(i);
    s.q = random_vec(2, rng);
    s.x = a.mul_vec(s.q);
    data.samples.push_back(std::move(s));
  }
  const PairSet pairs = jaclab::build_pairs(data, 6);
  const MlpSpec spec = spec_of(4, 1, 8, 4, Activation::Tanh, 31);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 31;
  const auto r0 = jaclab::train_neural_jacobian(pairs, spec, cfg, 0.0,
                                                InputEmbedding::TrigCosSin);
  const auto r1 = jaclab::train_neural_jacobian(pairs, spec, cfg, 1.0,
                                                InputEmbedding::TrigCosSin);
  CHECK_FALSE(mlp_equal(r0.model, r1.model));

  // Zero epochs returns the common initialization.
  TrainConfig zero = cfg;
  zero.epochs = 0;
  const auto ri = jaclab::train_neural_jacobian(pairs, spec, zero, 0.0,
                                                InputEmbedding::TrigCosSin);
  CHECK(mlp_equal(ri.model, jaclab::make_mlp(spec)));
}

TEST_CASE("planar kinematics training reaches validation RMSE below 1 cm") {
  jaclab::Environment env(jaclab::EnvModel::make(jaclab::EnvKind::Planar2),
                          jaclab::SimConfig{});
  const jaclab::Dataset data =
      jaclab::collect(env, 100, 100, jaclab::OuConfig{}, 0);
  REQUIRE(data.samples.size() == 10000);

  std::vector<std::vector<double>> inputs, targets;
  inputs.reserve(data.samples.size());
  for (const auto& s : data.samples) {
    inputs.push_back(jaclab::embed_input(InputEmbedding::TrigCosSin, s.q));
    targets.push_back(s.x);
  }
  MlpSpec spec = spec_of(4, 1, 100, 2, Activation::Tanh, 0);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 0;
  const auto result = jaclab::train_neural_kinematics(inputs, targets, spec, cfg);
  // Validation loss is a squared distance in meters^2.
  CHECK(std::sqrt(result.best_val_loss) < 0.01);
}

TEST_CASE("model files round-trip and reject corruption") {
  const MlpSpec spec = spec_of(4, 2, 12, 6, Activation::Relu, 77);
  const Mlp mlp = jaclab::make_mlp(spec);
  const auto path =
      (std::filesystem::temp_directory_path() / "jaclab_model.njlm").string();
  jaclab::save_mlp(mlp, path);
  const Mlp back = jaclab::load_mlp(path);
  CHECK(back.spec.input_dim == spec.input_dim);
  CHECK(back.spec.hidden_layers == spec.hidden_layers);
  CHECK(back.spec.hidden_width == spec.hidden_width);
  CHECK(back.spec.output_dim == spec.output_dim);
  CHECK(back.spec.activation == spec.activation);
  CHECK(back.spec.seed == spec.seed);
  CHECK(mlp_equal(back, mlp));

  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 9);
  CHECK_THROWS_WITH_AS(static_cast<void>(jaclab::load_mlp(path)),
                       doctest::Contains("truncated"), std::runtime_error);
  std::filesystem::remove(path);
}
