#include "jaclab/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "binio.hpp"
#include "jaclab/rng.hpp"

namespace jaclab {

std::string to_string(Activation a) {
  return a == Activation::Relu ? "relu" : "tanh";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw std::invalid_argument("unknown activation: " + s);
}

std::string to_string(InputEmbedding e) {
  return e == InputEmbedding::TrigCosSin ? "trig" : "raw";
}

InputEmbedding embedding_from_string(const std::string& s) {
  if (s == "trig") return InputEmbedding::TrigCosSin;
  if (s == "raw") return InputEmbedding::RawAngles;
  throw std::invalid_argument("unknown input embedding: " + s);
}

std::size_t embedded_dim(InputEmbedding e, std::size_t joint_dim) {
  return e == InputEmbedding::TrigCosSin ? 2 * joint_dim : joint_dim;
}

std::vector<double> embed_input(InputEmbedding e,
                                const std::vector<double>& q) {
  if (e == InputEmbedding::RawAngles) return q;
  std::vector<double> out;
  out.reserve(2 * q.size());
  for (double v : q) out.push_back(std::cos(v));
  for (double v : q) out.push_back(std::sin(v));
  return out;
}

namespace {

double activate(Activation a, double x) {
  if (a == Activation::Relu) return x > 0.0 ? x : 0.0;
  return std::tanh(x);
}

// relu' at exactly 0 is defined as 0.
double activate_deriv(Activation a, double x) {
  if (a == Activation::Relu) return x > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(x);
  return 1.0 - t * t;
}

std::vector<std::size_t> layer_dims(const MlpSpec& spec) {
  std::vector<std::size_t> dims;
  dims.push_back(spec.input_dim);
  for (std::size_t i = 0; i < spec.hidden_layers; ++i)
    dims.push_back(spec.hidden_width);
  dims.push_back(spec.output_dim);
  return dims;
}

void check_spec(const MlpSpec& spec) {
  if (spec.input_dim == 0 || spec.output_dim == 0 ||
      (spec.hidden_layers > 0 && spec.hidden_width == 0)) {
    throw std::invalid_argument("MlpSpec: dimensions must be positive");
  }
}

// Forward pass keeping everything backprop needs.
struct ForwardTrace {
  std::vector<std::vector<double>> acts;  // acts[0] = input, size L+1
  std::vector<std::vector<double>> pre;   // preactivations, size L
};

ForwardTrace forward_trace(const Mlp& mlp, const std::vector<double>& input) {
  if (input.size() != mlp.spec.input_dim) {
    throw std::invalid_argument("forward: input dim mismatch");
  }
  const std::size_t layers = mlp.layer_count();
  ForwardTrace t;
  t.acts.resize(layers + 1);
  t.pre.resize(layers);
  t.acts[0] = input;
  for (std::size_t l = 0; l < layers; ++l) {
    t.pre[l] = mlp.weights[l].mul_vec(t.acts[l]);
    for (std::size_t i = 0; i < t.pre[l].size(); ++i)
      t.pre[l][i] += mlp.biases[l][i];
    if (l + 1 == layers) {
      t.acts[l + 1] = t.pre[l];  // linear output layer
    } else {
      t.acts[l + 1].resize(t.pre[l].size());
      for (std::size_t i = 0; i < t.pre[l].size(); ++i)
        t.acts[l + 1][i] = activate(mlp.spec.activation, t.pre[l][i]);
    }
  }
  return t;
}

// Accumulates parameter gradients for one sample given dL/d(output).
void backprop_accumulate(const Mlp& mlp, const ForwardTrace& t,
                         std::vector<double> delta, MlpGrads& grads) {
  for (std::size_t li = mlp.layer_count(); li-- > 0;) {
    Mat& gw = grads.w[li];
    const auto& act_in = t.acts[li];
    for (std::size_t r = 0; r < gw.rows(); ++r) {
      const double d = delta[r];
      grads.b[li][r] += d;
      if (d == 0.0) continue;
      for (std::size_t c = 0; c < gw.cols(); ++c) gw(r, c) += d * act_in[c];
    }
    if (li == 0) break;
    std::vector<double> next = mlp.weights[li].tmul_vec(delta);
    for (std::size_t i = 0; i < next.size(); ++i)
      next[i] *= activate_deriv(mlp.spec.activation, t.pre[li - 1][i]);
    delta = std::move(next);
  }
}

void add_weight_decay(const Mlp& mlp, double wd, MlpGrads& grads) {
  if (wd == 0.0) return;
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    for (std::size_t i = 0; i < grads.w[l].data().size(); ++i)
      grads.w[l].data()[i] += wd * mlp.weights[l].data()[i];
  }
}

void seeded_shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(rng.next_u64() % static_cast<std::uint64_t>(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

Mlp make_mlp(const MlpSpec& spec) {
  check_spec(spec);
  const auto dims = layer_dims(spec);
  Mlp mlp;
  mlp.spec = spec;
  Rng rng(spec.seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t fan_in = dims[l], fan_out = dims[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Mat w(fan_out, fan_in);
    for (double& v : w.data()) v = rng.uniform(-limit, limit);
    mlp.weights.push_back(std::move(w));
    mlp.biases.emplace_back(fan_out, 0.0);
  }
  return mlp;
}

std::vector<double> forward(const Mlp& mlp, const std::vector<double>& input) {
  return forward_trace(mlp, input).acts.back();
}

Mat input_jacobian(const Mlp& mlp, const std::vector<double>& input) {
  const ForwardTrace t = forward_trace(mlp, input);
  Mat j = mlp.weights[0];
  for (std::size_t l = 1; l < mlp.layer_count(); ++l) {
    // Scale rows by act'(pre of layer l-1), then apply the next weight.
    for (std::size_t r = 0; r < j.rows(); ++r) {
      const double d = activate_deriv(mlp.spec.activation, t.pre[l - 1][r]);
      for (std::size_t c = 0; c < j.cols(); ++c) j(r, c) *= d;
    }
    j = mlp.weights[l] * j;
  }
  return j;
}

MlpGrads MlpGrads::zeros_like(const Mlp& mlp) {
  MlpGrads g;
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    g.w.emplace_back(mlp.weights[l].rows(), mlp.weights[l].cols());
    g.b.emplace_back(mlp.biases[l].size(), 0.0);
  }
  return g;
}

void MlpGrads::scale(double s) {
  for (auto& m : w)
    for (double& v : m.data()) v *= s;
  for (auto& bv : b)
    for (double& v : bv) v *= s;
}

AdamState AdamState::zeros_like(const Mlp& mlp) {
  AdamState s;
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    s.m_w.emplace_back(mlp.weights[l].rows(), mlp.weights[l].cols());
    s.v_w.emplace_back(mlp.weights[l].rows(), mlp.weights[l].cols());
    s.m_b.emplace_back(mlp.biases[l].size(), 0.0);
    s.v_b.emplace_back(mlp.biases[l].size(), 0.0);
  }
  return s;
}

void adam_step(Mlp& mlp, const MlpGrads& grads, AdamState& state,
               const TrainConfig& cfg) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, state.step);
  const double bc2 = 1.0 - std::pow(cfg.beta2, state.step);
  auto update = [&](double& p, double g, double& m, double& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    p -= cfg.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + cfg.epsilon);
  };
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    auto& w = mlp.weights[l].data();
    const auto& gw = grads.w[l].data();
    auto& mw = state.m_w[l].data();
    auto& vw = state.v_w[l].data();
    for (std::size_t i = 0; i < w.size(); ++i) update(w[i], gw[i], mw[i], vw[i]);
    auto& b = mlp.biases[l];
    const auto& gb = grads.b[l];
    auto& mb = state.m_b[l];
    auto& vb = state.v_b[l];
    for (std::size_t i = 0; i < b.size(); ++i) update(b[i], gb[i], mb[i], vb[i]);
  }
}

double mse_backprop(const Mlp& mlp,
                    const std::vector<std::vector<double>>& inputs,
                    const std::vector<std::vector<double>>& targets,
                    const std::vector<std::size_t>& batch,
                    double weight_decay, MlpGrads& grads) {
  if (batch.empty()) throw std::invalid_argument("mse_backprop: empty batch");
  if (inputs.size() != targets.size()) {
    throw std::invalid_argument("mse_backprop: inputs/targets size mismatch");
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t idx : batch) {
    const ForwardTrace t = forward_trace(mlp, inputs[idx]);
    const auto& y = t.acts.back();
    const auto& target = targets[idx];
    if (target.size() != y.size()) {
      throw std::invalid_argument("mse_backprop: target dim mismatch");
    }
    std::vector<double> delta(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double r = y[i] - target[i];
      loss += r * r * inv_b;
      delta[i] = 2.0 * r * inv_b;
    }
    backprop_accumulate(mlp, t, std::move(delta), grads);
  }
  add_weight_decay(mlp, weight_decay, grads);
  return loss;
}

double mse_backprop(const Mlp& mlp,
                    const std::vector<std::vector<double>>& inputs,
                    const std::vector<std::vector<double>>& targets,
                    double weight_decay, MlpGrads& grads) {
  std::vector<std::size_t> all(inputs.size());
  std::iota(all.begin(), all.end(), 0);
  return mse_backprop(mlp, inputs, targets, all, weight_decay, grads);
}

double hyperplane_loss(const Mat& j_pred,
                       const std::vector<FiniteDiffPair>& pairs, double beta) {
  if (pairs.empty()) throw std::invalid_argument("hyperplane_loss: no pairs");
  double loss = 0.0;
  for (const auto& p : pairs) {
    const std::vector<double> r = vec_sub(j_pred.mul_vec(p.dq), p.dx);
    loss += vec_dot(r, r);
  }
  if (beta > 0.0) {
    const Mat pj = pinv(j_pred);
    for (const auto& p : pairs) {
      const std::vector<double> s = vec_sub(p.dq, pj.mul_vec(p.dx));
      loss += beta * vec_dot(s, s);
    }
  }
  return loss;
}

double hyperplane_loss_and_grad(const Mat& j_pred,
                                const std::vector<FiniteDiffPair>& pairs,
                                double beta, Mat& grad) {
  if (pairs.empty()) {
    throw std::invalid_argument("hyperplane_loss_and_grad: no pairs");
  }
  const std::size_t m = j_pred.rows(), n = j_pred.cols();
  grad = Mat(m, n);
  double loss = 0.0;
  for (const auto& p : pairs) {
    const std::vector<double> r = vec_sub(j_pred.mul_vec(p.dq), p.dx);
    loss += vec_dot(r, r);
    for (std::size_t i = 0; i < m; ++i) {
      const double ri = 2.0 * r[i];
      for (std::size_t c = 0; c < n; ++c) grad(i, c) += ri * p.dq[c];
    }
  }
  if (beta <= 0.0) return loss;

  // Inverse-relation term. The gradient contracts the Golub-Pereyra
  // expansion of d(J+) against the residual, giving three rank-one terms
  // per pair; the pair-independent operators are built once.
  const SvdResult sv = svd(j_pred);
  const double tol = default_rank_tol(sv.sigma.front(), m, n);
  if (sv.sigma.back() <= 100.0 * tol) {
    throw RankError(
        "hyperplane_loss_and_grad: beta term needs full-rank prediction");
  }
  const Mat pj = pinv(j_pred, tol);
  const Mat ppt = pj * pj.transposed();                 // n x n
  const Mat im_jp = Mat::identity(m) - j_pred * pj;     // m x m
  const Mat in_pj = Mat::identity(n) - pj * j_pred;     // n x n
  const Mat ptp = pj.transposed() * pj;                 // m x m

  for (const auto& p : pairs) {
    const std::vector<double> u = pj.mul_vec(p.dx);     // J+ dx
    const std::vector<double> s = vec_sub(p.dq, u);
    loss += beta * vec_dot(s, s);
    const std::vector<double> a1 = pj.tmul_vec(s);      // J+^T s      (m)
    const std::vector<double> a2 = im_jp.mul_vec(p.dx); // (I-JJ+) dx  (m)
    const std::vector<double> b2 = ppt.mul_vec(s);      // J+J+^T s    (n)
    const std::vector<double> a3 = ptp.mul_vec(p.dx);   // J+^TJ+ dx   (m)
    const std::vector<double> b3 = in_pj.mul_vec(s);    // (I-J+J) s   (n)
    const double w = 2.0 * beta;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t c = 0; c < n; ++c) {
        grad(i, c) += w * (a1[i] * u[c] - a2[i] * b2[c] - a3[i] * b3[c]);
      }
    }
  }
  return loss;
}

namespace {

// Shared epoch/split/snapshot scaffolding for both trainers. Callables:
//   batch_fn(indices, grads) -> mean batch loss with gradients accumulated
//   eval_fn(index) -> per-sample validation loss
template <typename BatchFn, typename EvalFn>
TrainResult train_loop(std::size_t n_samples, const TrainConfig& cfg,
                       BatchFn&& batch_fn, EvalFn&& eval_fn, Mlp mlp) {
  if (n_samples < 2) {
    throw std::invalid_argument("training requires at least 2 samples");
  }
  if (cfg.validation_fraction <= 0.0 || cfg.validation_fraction >= 1.0) {
    throw std::invalid_argument("validation_fraction must be in (0, 1)");
  }
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size >= 1");

  Rng rng(cfg.seed);
  std::vector<std::size_t> perm(n_samples);
  std::iota(perm.begin(), perm.end(), 0);
  seeded_shuffle(perm, rng);

  const std::size_t n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(
          std::llround(cfg.validation_fraction * static_cast<double>(n_samples))),
      1, n_samples - 1);
  std::vector<std::size_t> val_idx(perm.end() - static_cast<std::ptrdiff_t>(n_val),
                                   perm.end());
  std::vector<std::size_t> train_idx(perm.begin(),
                                     perm.end() - static_cast<std::ptrdiff_t>(n_val));

  auto val_loss = [&](const Mlp& model) {
    double acc = 0.0;
    for (std::size_t idx : val_idx) acc += eval_fn(model, idx);
    return acc / static_cast<double>(val_idx.size());
  };

  TrainResult result;
  result.model = mlp;
  result.best_epoch = 0;
  result.best_val_loss = val_loss(mlp);

  AdamState adam = AdamState::zeros_like(mlp);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    seeded_shuffle(train_idx, rng);
    double train_loss_acc = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < train_idx.size();
         start += cfg.batch_size) {
      const std::size_t stop =
          std::min(start + cfg.batch_size, train_idx.size());
      const std::vector<std::size_t> batch(train_idx.begin() + start,
                                           train_idx.begin() + stop);
      MlpGrads grads = MlpGrads::zeros_like(mlp);
      const double loss = batch_fn(mlp, batch, grads);
      adam_step(mlp, grads, adam, cfg);
      train_loss_acc += loss * static_cast<double>(batch.size());
      seen += batch.size();
    }
    const double epoch_train = train_loss_acc / static_cast<double>(seen);
    const double epoch_val = val_loss(mlp);
    result.log.push_back({epoch, epoch_train, epoch_val});
    if (epoch_val < result.best_val_loss) {
      result.best_val_loss = epoch_val;
      result.best_epoch = epoch;
      result.model = mlp;
    }
  }
  return result;
}

}  // namespace

TrainResult train_neural_kinematics(
    const std::vector<std::vector<double>>& inputs,
    const std::vector<std::vector<double>>& targets, const MlpSpec& spec,
    const TrainConfig& cfg) {
  if (inputs.empty()) {
    throw std::invalid_argument("train_neural_kinematics: empty dataset");
  }
  if (inputs.size() != targets.size()) {
    throw std::invalid_argument("train_neural_kinematics: size mismatch");
  }
  if (inputs.front().size() != spec.input_dim ||
      targets.front().size() != spec.output_dim) {
    throw std::invalid_argument("train_neural_kinematics: dim mismatch");
  }
  return train_loop(
      inputs.size(), cfg,
      [&](const Mlp& model, const std::vector<std::size_t>& batch,
          MlpGrads& grads) {
        return mse_backprop(model, inputs, targets, batch, cfg.weight_decay,
                            grads);
      },
      [&](const Mlp& model, std::size_t idx) {
        const std::vector<double> y = forward(model, inputs[idx]);
        const std::vector<double> r = vec_sub(y, targets[idx]);
        return vec_dot(r, r);
      },
      make_mlp(spec));
}

TrainResult train_neural_jacobian(const PairSet& pairs, const MlpSpec& spec,
                                  const TrainConfig& cfg, double beta,
                                  InputEmbedding embedding) {
  if (pairs.anchors.empty()) {
    throw std::invalid_argument("train_neural_jacobian: empty pair set");
  }
  const std::size_t m = env_feature_dim(pairs.kind);
  const std::size_t n = env_joint_dim(pairs.kind);
  if (spec.output_dim != m * n) {
    throw std::invalid_argument(
        "train_neural_jacobian: output_dim must be feature_dim * joint_dim");
  }
  if (spec.input_dim != embedded_dim(embedding, n)) {
    throw std::invalid_argument(
        "train_neural_jacobian: input_dim inconsistent with embedding");
  }
  for (const auto& a : pairs.anchors) {
    if (a.pairs.size() < 2) {
      throw std::invalid_argument(
          "train_neural_jacobian: anchors need at least 2 pairs");
    }
  }

  std::vector<std::vector<double>> inputs;
  inputs.reserve(pairs.anchors.size());
  for (const auto& a : pairs.anchors) inputs.push_back(embed_input(embedding, a.q));

  auto anchor_loss_grad = [&](const Mlp& model, std::size_t idx, double scale,
                              MlpGrads* grads) {
    const ForwardTrace t = forward_trace(model, inputs[idx]);
    const Mat j(m, n, t.acts.back());
    if (grads == nullptr) {
      return hyperplane_loss(j, pairs.anchors[idx].pairs, beta);
    }
    Mat dj;
    double loss;
    try {
      loss = hyperplane_loss_and_grad(j, pairs.anchors[idx].pairs, beta, dj);
    } catch (const RankError& e) {
      throw RankError("anchor " + std::to_string(idx) + ": " + e.what());
    }
    std::vector<double> delta = dj.data();
    for (double& v : delta) v *= scale;
    backprop_accumulate(model, t, std::move(delta), *grads);
    return loss;
  };

  return train_loop(
      pairs.anchors.size(), cfg,
      [&](const Mlp& model, const std::vector<std::size_t>& batch,
          MlpGrads& grads) {
        const double inv_b = 1.0 / static_cast<double>(batch.size());
        double loss = 0.0;
        for (std::size_t idx : batch) {
          loss += inv_b * anchor_loss_grad(model, idx, inv_b, &grads);
        }
        add_weight_decay(model, cfg.weight_decay, grads);
        return loss;
      },
      [&](const Mlp& model, std::size_t idx) {
        return anchor_loss_grad(model, idx, 0.0, nullptr);
      },
      make_mlp(spec));
}

namespace {
constexpr char kModelMagic[4] = {'N', 'J', 'L', 'M'};
constexpr std::uint32_t kModelVersion = 1;
}  // namespace

void save_mlp(const Mlp& mlp, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save_mlp: cannot open " + path);
  binio::write_bytes(f, kModelMagic, 4);
  binio::write_pod(f, kModelVersion);
  binio::write_pod(f, static_cast<std::uint64_t>(mlp.spec.input_dim));
  binio::write_pod(f, static_cast<std::uint64_t>(mlp.spec.hidden_layers));
  binio::write_pod(f, static_cast<std::uint64_t>(mlp.spec.hidden_width));
  binio::write_pod(f, static_cast<std::uint64_t>(mlp.spec.output_dim));
  binio::write_pod(
      f, static_cast<std::uint8_t>(mlp.spec.activation == Activation::Relu ? 0 : 1));
  binio::write_pod(f, mlp.spec.seed);
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    binio::write_bytes(f, mlp.weights[l].data().data(),
                       mlp.weights[l].data().size() * sizeof(double));
    binio::write_bytes(f, mlp.biases[l].data(),
                       mlp.biases[l].size() * sizeof(double));
  }
  if (!f) throw std::runtime_error("save_mlp: write failed for " + path);
}

Mlp load_mlp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_mlp: cannot open " + path);
  char magic[4];
  binio::read_bytes(f, magic, 4, "magic");
  if (std::memcmp(magic, kModelMagic, 4) != 0) {
    throw std::runtime_error("load_mlp: bad magic, not a model file");
  }
  const auto version = binio::read_pod<std::uint32_t>(f, "version");
  if (version != kModelVersion) {
    throw std::runtime_error("load_mlp: unsupported format version " +
                             std::to_string(version));
  }
  MlpSpec spec;
  spec.input_dim = binio::read_pod<std::uint64_t>(f, "input_dim");
  spec.hidden_layers = binio::read_pod<std::uint64_t>(f, "hidden_layers");
  spec.hidden_width = binio::read_pod<std::uint64_t>(f, "hidden_width");
  spec.output_dim = binio::read_pod<std::uint64_t>(f, "output_dim");
  const auto act = binio::read_pod<std::uint8_t>(f, "activation");
  if (act > 1) throw std::runtime_error("load_mlp: bad activation code");
  spec.activation = act == 0 ? Activation::Relu : Activation::Tanh;
  spec.seed = binio::read_pod<std::uint64_t>(f, "seed");
  check_spec(spec);

  Mlp mlp;
  mlp.spec = spec;
  const auto dims = layer_dims(spec);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Mat w(dims[l + 1], dims[l]);
    binio::read_bytes(f, w.data().data(), w.data().size() * sizeof(double),
                      "weights");
    if (!w.all_finite()) throw std::runtime_error("load_mlp: non-finite weights");
    mlp.weights.push_back(std::move(w));
    std::vector<double> b(dims[l + 1]);
    binio::read_bytes(f, b.data(), b.size() * sizeof(double), "biases");
    mlp.biases.push_back(std::move(b));
  }
  binio::expect_eof(f, "load_mlp");
  return mlp;
}

}  // namespace jaclab
