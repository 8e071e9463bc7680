#pragma once

// Fully connected good/bad pair classifier: affine -> ReLU -> ... -> softmax,
// trained with mean cross-entropy, backpropagation and Adam. All math in f64.

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace framesel {

enum class Activation : std::uint8_t { kIdentity = 0, kRelu = 1, kSoftmax = 2 };

/// y = activation(weight * x + bias); weight is fan_out x fan_in.
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
  Activation activation = Activation::kRelu;
};

struct MlpModel {
  std::vector<DenseLayer> layers;

  /// [input, hidden..., output]
  std::vector<Eigen::Index> layer_dims() const;
  Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
  void validate() const;
};

/// 12 -> 64 -> 32 -> 2
inline const std::vector<Eigen::Index> kDefaultLayerDims{12, 64, 32, 2};

/// Glorot-uniform weights, zero biases, ReLU hidden layers, softmax output.
MlpModel init_model(std::uint64_t seed, std::span<const Eigen::Index> layer_dims);

struct Prediction {
  int label = 0;
  double prob_good = 0.5;
};

/// Per-layer inputs and pre-activations kept for backpropagation.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> pre_activations;
};

/// Column-per-example batch forward pass; returns class probabilities (outputs x n).
Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                              ForwardCache* cache = nullptr);

Prediction forward(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& input, ForwardCache* cache = nullptr);

/// Same as forward without caches; label is 1 iff prob_good >= 0.5.
Prediction predict(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& input);

struct Gradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  static Gradients zeros_like(const MlpModel& model);
};

struct LossAndGrad {
  double loss = 0.0;
  Gradients grad;
};

/// Mean cross-entropy over the batch and its exact gradient.
LossAndGrad loss_and_grad(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                          std::span<const int> labels);

struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 32;
  int epochs = 300;
  std::uint64_t seed = 0;
  double val_fraction = 0.2;
  std::vector<Eigen::Index> hidden{64, 32};

  void validate() const;
};

struct AdamState {
  Gradients first_moment;
  Gradients second_moment;

  static AdamState zeros_like(const MlpModel& model);
};

/// One Adam update at step t >= 1 (bias correction uses t).
void adam_step(MlpModel& model, const Gradients& grad, AdamState& state, long t, const TrainConfig& config);

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> train_accuracy;
  std::vector<double> val_loss;
  std::vector<double> val_accuracy;
};

/// inputs: one example per column.
struct Dataset {
  Eigen::MatrixXd inputs;
  std::vector<int> labels;

  Eigen::Index size() const { return inputs.cols(); }
};

struct TrainResult {
  MlpModel model;
  TrainHistory history;
  int best_epoch = 0;
  std::vector<Eigen::Index> train_indices;
  std::vector<Eigen::Index> val_indices;
};

/// Seeded shuffle, then floor((1 - val_fraction) * n) training examples and
/// the rest for validation.
void split_dataset(Eigen::Index n, double val_fraction, std::uint64_t seed, std::vector<Eigen::Index>& train,
                   std::vector<Eigen::Index>& val);

/// Inputs are standardized with training-split statistics during training and
/// the scaling is folded into the first layer of the returned model. The
/// returned parameters are those of the epoch with the best validation accuracy.
TrainResult train(const Dataset& data, const TrainConfig& config);

/// Fraction of columns whose predicted label matches.
double accuracy(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs, std::span<const int> labels);

/// ".mlp": "MLP1", u32 layer count, then per layer u32 rows, u32 cols,
/// f64 weights (column-major), f64 biases, u8 activation code.
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace framesel
