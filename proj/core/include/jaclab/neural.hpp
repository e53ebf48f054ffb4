// From-scratch multilayer perceptron with backpropagation, Adam, input
// Jacobian extraction, and the two training objectives used by the Jacobian
// estimators: plain regression MSE, and the hyperplane secant loss with an
// optional inverse-relation term weighted by beta (differentiated through
// the pseudo-inverse).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jaclab/collection.hpp"
#include "jaclab/linalg.hpp"

namespace jaclab {

enum class Activation { Relu, Tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// What the networks see as input. The trig embedding [cos q, sin q] is the
// default: it is periodic and matches the state features the environments
// expose. Raw joint angles remain available via config.
enum class InputEmbedding { TrigCosSin, RawAngles };

std::string to_string(InputEmbedding e);
InputEmbedding embedding_from_string(const std::string& s);

std::size_t embedded_dim(InputEmbedding e, std::size_t joint_dim);
std::vector<double> embed_input(InputEmbedding e, const std::vector<double>& q);

struct MlpSpec {
  std::size_t input_dim = 0;
  std::size_t hidden_layers = 0;
  std::size_t hidden_width = 100;
  std::size_t output_dim = 0;
  Activation activation = Activation::Relu;
  std::uint64_t seed = 0;
};

// Weights are (out x in) row-major; the final layer is linear. Weight init
// is uniform(+-sqrt(6/(fan_in+fan_out))) from the spec seed, biases zero.
struct Mlp {
  MlpSpec spec;
  std::vector<Mat> weights;
  std::vector<std::vector<double>> biases;

  std::size_t layer_count() const { return weights.size(); }
};

Mlp make_mlp(const MlpSpec& spec);

std::vector<double> forward(const Mlp& mlp, const std::vector<double>& input);

// d output / d input as a (output_dim x input_dim) matrix: the product
// W_L D_{L-1} ... D_1 W_1 with D_k = diag(act'(preactivation_k)). The relu
// derivative at exactly 0 is 0.
Mat input_jacobian(const Mlp& mlp, const std::vector<double>& input);

struct MlpGrads {
  std::vector<Mat> w;
  std::vector<std::vector<double>> b;

  static MlpGrads zeros_like(const Mlp& mlp);
  void scale(double s);
};

struct TrainConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 32;
  int epochs = 0;
  double weight_decay = 0.0;
  double validation_fraction = 0.15;
  std::uint64_t seed = 0;  // drives the split and per-epoch shuffles
};

struct AdamState {
  std::vector<Mat> m_w, v_w;
  std::vector<std::vector<double>> m_b, v_b;
  long step = 0;

  static AdamState zeros_like(const Mlp& mlp);
};

// Standard bias-corrected Adam update, applied in place.
void adam_step(Mlp& mlp, const MlpGrads& grads, AdamState& state,
               const TrainConfig& cfg);

// Mean-over-batch squared error and its parameter gradients; adds the
// weight-decay term (wd * W, weights only) to the gradients when wd > 0.
// Returns the data loss.
double mse_backprop(const Mlp& mlp,
                    const std::vector<std::vector<double>>& inputs,
                    const std::vector<std::vector<double>>& targets,
                    const std::vector<std::size_t>& batch,
                    double weight_decay, MlpGrads& grads);
// Whole-input-set convenience overload.
double mse_backprop(const Mlp& mlp,
                    const std::vector<std::vector<double>>& inputs,
                    const std::vector<std::vector<double>>& targets,
                    double weight_decay, MlpGrads& grads);

// loss = sum over pairs of |dx - J dq|^2 + beta * |dq - J+ dx|^2.
// The beta term needs no rank margin for evaluation; the pseudo-inverse
// always exists.
double hyperplane_loss(const Mat& j_pred,
                       const std::vector<FiniteDiffPair>& pairs, double beta);

// Same loss plus d loss / d J. The beta-term gradient applies the adjoint of
// the pseudo-inverse directional derivative and therefore requires j_pred to
// be full rank with margin; throws RankError otherwise.
double hyperplane_loss_and_grad(const Mat& j_pred,
                                const std::vector<FiniteDiffPair>& pairs,
                                double beta, Mat& grad);

struct TrainLogEntry {
  int epoch = 0;  // 0 = initialization (no update yet)
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  Mlp model;  // snapshot with the lowest validation loss
  std::vector<TrainLogEntry> log;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

// Supervised regression on pre-embedded (input, target) pairs. Holds out
// validation_fraction (last slice of a one-time seeded shuffle), trains with
// mini-batch Adam, evaluates validation MSE each epoch, and returns the
// best-validation snapshot.
TrainResult train_neural_kinematics(
    const std::vector<std::vector<double>>& inputs,
    const std::vector<std::vector<double>>& targets, const MlpSpec& spec,
    const TrainConfig& cfg);

// Trains a network emitting the Jacobian entries (row-major, output_dim =
// m * n) on precomputed neighbor pairs, mini-batching over anchors. Anchor
// inputs are embedded internally.
TrainResult train_neural_jacobian(const PairSet& pairs, const MlpSpec& spec,
                                  const TrainConfig& cfg, double beta,
                                  InputEmbedding embedding);

// Versioned binary model file (magic "NJLM"): spec fields then parameters as
// 64-bit floats in layer order.
void save_mlp(const Mlp& mlp, const std::string& path);
Mlp load_mlp(const std::string& path);

}  // namespace jaclab
