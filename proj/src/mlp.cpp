#include "framesel/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "framesel/binio.hpp"
#include "framesel/error.hpp"
#include "framesel/random.hpp"

namespace framesel {

std::vector<Eigen::Index> MlpModel::layer_dims() const {
  std::vector<Eigen::Index> dims;
  if (layers.empty()) return dims;
  dims.push_back(layers.front().weight.cols());
  for (const DenseLayer& layer : layers) dims.push_back(layer.weight.rows());
  return dims;
}

void MlpModel::validate() const {
  require(!layers.empty(), "model has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const DenseLayer& layer = layers[k];
    const std::string where = "layer " + std::to_string(k);
    require(layer.weight.rows() >= 1 && layer.weight.cols() >= 1, where + ": empty weight matrix");
    require(layer.bias.size() == layer.weight.rows(), where + ": bias length does not match weight rows");
    require(k == 0 || layer.weight.cols() == layers[k - 1].weight.rows(),
            where + ": input width does not match previous layer output");
    require(layer.weight.allFinite() && layer.bias.allFinite(), where + ": non-finite parameters");
    const bool last = k + 1 == layers.size();
    require(last == (layer.activation == Activation::kSoftmax), where + ": softmax must be the output activation only");
  }
  require(layers.back().weight.rows() == 2, "output layer must have two neurons (bad, good)");
}

MlpModel init_model(std::uint64_t seed, std::span<const Eigen::Index> layer_dims) {
  require(layer_dims.size() >= 2, "need at least input and output dimensions");
  for (Eigen::Index d : layer_dims) require(d >= 1, "layer dimensions must be positive");
  Rng rng(seed);
  MlpModel model;
  for (std::size_t k = 0; k + 1 < layer_dims.size(); ++k) {
    const Eigen::Index fan_in = layer_dims[k];
    const Eigen::Index fan_out = layer_dims[k + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseLayer layer;
    layer.weight.resize(fan_out, fan_in);
    for (Eigen::Index c = 0; c < fan_in; ++c) {
      for (Eigen::Index r = 0; r < fan_out; ++r) layer.weight(r, c) = rng.uniform(-limit, limit);
    }
    layer.bias = Eigen::VectorXd::Zero(fan_out);
    layer.activation = k + 2 == layer_dims.size() ? Activation::kSoftmax : Activation::kRelu;
    model.layers.push_back(std::move(layer));
  }
  return model;
}

namespace {

void softmax_columns(Eigen::MatrixXd& z) {
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    auto col = z.col(c);
    col.array() -= col.maxCoeff();
    col = col.array().exp();
    col /= col.sum();
  }
}

}  // namespace

Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                              ForwardCache* cache) {
  if (inputs.rows() != model.input_dim()) {
    throw Error("input has " + std::to_string(inputs.rows()) + " features but the model expects " +
                std::to_string(model.input_dim()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre_activations.clear();
  }
  Eigen::MatrixXd x = inputs;
  for (const DenseLayer& layer : model.layers) {
    Eigen::MatrixXd z = layer.weight * x;
    z.colwise() += layer.bias;
    if (cache) {
      cache->inputs.push_back(x);
      cache->pre_activations.push_back(z);
    }
    switch (layer.activation) {
      case Activation::kRelu:
        z = z.cwiseMax(0.0);
        break;
      case Activation::kSoftmax:
        softmax_columns(z);
        break;
      case Activation::kIdentity:
        break;
    }
    x = std::move(z);
  }
  return x;
}

Prediction forward(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& input, ForwardCache* cache) {
  const Eigen::MatrixXd probs = forward_batch(model, input, cache);
  Prediction p;
  p.prob_good = probs(1, 0);
  p.label = p.prob_good >= 0.5 ? 1 : 0;
  return p;
}

Prediction predict(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& input) {
  return forward(model, input, nullptr);
}

Gradients Gradients::zeros_like(const MlpModel& model) {
  Gradients g;
  for (const DenseLayer& layer : model.layers) {
    g.weight.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
  }
  return g;
}

LossAndGrad loss_and_grad(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                          std::span<const int> labels) {
  const Eigen::Index n = inputs.cols();
  require(n >= 1, "loss needs a non-empty batch");
  require(static_cast<Eigen::Index>(labels.size()) == n, "one label per example is required");
  for (int y : labels) require(y == 0 || y == 1, "labels must be 0 or 1");

  ForwardCache cache;
  const Eigen::MatrixXd probs = forward_batch(model, inputs, &cache);

  LossAndGrad out;
  const Eigen::MatrixXd& logits = cache.pre_activations.back();
  for (Eigen::Index c = 0; c < n; ++c) {
    const double top = logits.col(c).maxCoeff();
    const double log_norm = top + std::log((logits.col(c).array() - top).exp().sum());
    out.loss -= logits(labels[static_cast<std::size_t>(c)], c) - log_norm;
  }
  out.loss /= static_cast<double>(n);

  out.grad = Gradients::zeros_like(model);
  // d(loss)/d(logits) for softmax + cross-entropy.
  Eigen::MatrixXd delta = probs;
  for (Eigen::Index c = 0; c < n; ++c) delta(labels[static_cast<std::size_t>(c)], c) -= 1.0;
  delta /= static_cast<double>(n);

  for (std::size_t k = model.layers.size(); k-- > 0;) {
    out.grad.weight[k].noalias() = delta * cache.inputs[k].transpose();
    out.grad.bias[k] = delta.rowwise().sum();
    if (k == 0) break;
    Eigen::MatrixXd upstream = model.layers[k].weight.transpose() * delta;
    const DenseLayer& below = model.layers[k - 1];
    if (below.activation == Activation::kRelu) {
      upstream.array() *= (cache.pre_activations[k - 1].array() > 0.0).cast<double>();
    }
    delta = std::move(upstream);
  }
  return out;
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0, "learning rate must be positive");
  require(val_fraction > 0.0 && val_fraction < 1.0, "validation fraction must lie in (0, 1)");
  require(batch_size >= 1, "batch size must be at least 1");
  require(epochs >= 1, "at least one epoch is required");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_eps > 0.0,
          "invalid Adam hyper-parameters");
}

AdamState AdamState::zeros_like(const MlpModel& model) {
  return {Gradients::zeros_like(model), Gradients::zeros_like(model)};
}

namespace {

template <typename Param, typename Grad, typename Moment>
void adam_update(Param& theta, const Grad& g, Moment& m, Moment& v, double lr, double b1, double b2, double eps,
                 double correction1, double correction2) {
  m = b1 * m + (1.0 - b1) * g;
  v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
  theta.array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + eps);
}

}  // namespace

void adam_step(MlpModel& model, const Gradients& grad, AdamState& state, long t, const TrainConfig& config) {
  require(t >= 1, "Adam step counter starts at 1");
  require(grad.weight.size() == model.layers.size() && state.first_moment.weight.size() == model.layers.size(),
          "gradient/state shapes do not match the model");
  const double c1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    adam_update(model.layers[k].weight, grad.weight[k], state.first_moment.weight[k], state.second_moment.weight[k],
                config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps, c1, c2);
    adam_update(model.layers[k].bias, grad.bias[k], state.first_moment.bias[k], state.second_moment.bias[k],
                config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps, c1, c2);
  }
}

void split_dataset(Eigen::Index n, double val_fraction, std::uint64_t seed, std::vector<Eigen::Index>& train,
                   std::vector<Eigen::Index>& val) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(derive_seed(seed, 0));
  shuffle(order, rng);
  const auto n_train = static_cast<std::size_t>(std::floor((1.0 - val_fraction) * static_cast<double>(n) + 1e-9));
  train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
}

namespace {

Eigen::MatrixXd gather(const Eigen::MatrixXd& inputs, std::span<const Eigen::Index> idx) {
  Eigen::MatrixXd out(inputs.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = inputs.col(idx[c]);
  return out;
}

std::vector<int> gather(const std::vector<int>& labels, std::span<const Eigen::Index> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (Eigen::Index i : idx) out.push_back(labels[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

double accuracy(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs, std::span<const int> labels) {
  if (inputs.cols() == 0) return 0.0;
  const Eigen::MatrixXd probs = forward_batch(model, inputs);
  Eigen::Index correct = 0;
  for (Eigen::Index c = 0; c < probs.cols(); ++c) {
    const int label = probs(1, c) >= 0.5 ? 1 : 0;
    if (label == labels[static_cast<std::size_t>(c)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(probs.cols());
}

TrainResult train(const Dataset& data, const TrainConfig& config) {
  config.validate();
  const Eigen::Index n = data.size();
  require(static_cast<Eigen::Index>(data.labels.size()) == n, "one label per example is required");
  require(data.inputs.allFinite(), "training inputs contain non-finite values");
  const auto positives = std::count(data.labels.begin(), data.labels.end(), 1);
  const auto negatives = std::count(data.labels.begin(), data.labels.end(), 0);
  require(positives + negatives == n, "labels must be 0 or 1");
  if (positives == 0 || negatives == 0) throw Error("training data contains a single class");
  require(positives >= 10 && negatives >= 10, "need at least 10 examples of each class");

  TrainResult result;
  split_dataset(n, config.val_fraction, config.seed, result.train_indices, result.val_indices);
  require(!result.train_indices.empty() && !result.val_indices.empty(), "dataset too small to split");

  Eigen::MatrixXd train_x = gather(data.inputs, result.train_indices);
  const std::vector<int> train_y = gather(data.labels, result.train_indices);
  Eigen::MatrixXd val_x = gather(data.inputs, result.val_indices);
  const std::vector<int> val_y = gather(data.labels, result.val_indices);

  const Eigen::VectorXd mu = train_x.rowwise().mean();
  Eigen::VectorXd sigma = ((train_x.colwise() - mu).array().square().rowwise().mean()).sqrt();
  for (Eigen::Index r = 0; r < sigma.size(); ++r) {
    if (!(sigma[r] > 1e-12)) sigma[r] = 1.0;
  }
  train_x = (train_x.colwise() - mu).array().colwise() / sigma.array();
  val_x = (val_x.colwise() - mu).array().colwise() / sigma.array();

  std::vector<Eigen::Index> dims{data.inputs.rows()};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(2);
  MlpModel model = init_model(derive_seed(config.seed, 1), dims);
  AdamState state = AdamState::zeros_like(model);
  Rng rng(derive_seed(config.seed, 2));

  std::vector<Eigen::Index> order(result.train_indices.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  MlpModel best = model;
  double best_acc = -1.0;
  double best_loss = 0.0;
  long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::span<const Eigen::Index> idx(order.data() + start, stop - start);
      const Eigen::MatrixXd bx = gather(train_x, idx);
      const std::vector<int> by = gather(train_y, idx);
      const LossAndGrad lg = loss_and_grad(model, bx, by);
      adam_step(model, lg.grad, state, ++step, config);
    }

    const double tr_loss = loss_and_grad(model, train_x, train_y).loss;
    const double va_loss = loss_and_grad(model, val_x, val_y).loss;
    const double tr_acc = accuracy(model, train_x, train_y);
    const double va_acc = accuracy(model, val_x, val_y);
    result.history.train_loss.push_back(tr_loss);
    result.history.train_accuracy.push_back(tr_acc);
    result.history.val_loss.push_back(va_loss);
    result.history.val_accuracy.push_back(va_acc);
    if (va_acc > best_acc || (va_acc == best_acc && va_loss < best_loss)) {
      best_acc = va_acc;
      best_loss = va_loss;
      best = model;
      result.best_epoch = epoch;
    }
  }

  // Fold (x - mu) / sigma into the first affine map.
  DenseLayer& first = best.layers.front();
  first.weight = first.weight.array().rowwise() / sigma.transpose().array();
  first.bias -= first.weight * mu;
  result.model = std::move(best);
  return result;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  model.validate();
  binio::Writer w;
  w.magic("MLP1");
  w.u32(static_cast<std::uint32_t>(model.layers.size()));
  for (const DenseLayer& layer : model.layers) {
    w.u32(static_cast<std::uint32_t>(layer.weight.rows()));
    w.u32(static_cast<std::uint32_t>(layer.weight.cols()));
    for (Eigen::Index k = 0; k < layer.weight.size(); ++k) w.f64(layer.weight.data()[k]);
    for (Eigen::Index k = 0; k < layer.bias.size(); ++k) w.f64(layer.bias[k]);
    w.u8(static_cast<std::uint8_t>(layer.activation));
  }
  w.save(path);
}

MlpModel load_model(const std::filesystem::path& path) {
  auto r = binio::Reader::open(path);
  r.expect_magic("MLP1");
  const std::uint32_t count = r.u32("layer_count");
  require(count >= 1 && count <= 64, path.string() + ": implausible layer count " + std::to_string(count));
  MlpModel model;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto rows = r.u32("rows");
    const auto cols = r.u32("cols");
    if (r.remaining() / 8 < std::size_t{rows} * cols + rows) {
      throw Error(path.string() + ": truncated while reading field 'weights' of layer " + std::to_string(k));
    }
    DenseLayer layer;
    layer.weight.resize(rows, cols);
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = r.f64("weights");
    layer.bias.resize(rows);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = r.f64("biases");
    const std::uint8_t code = r.u8("activation");
    require(code <= 2, path.string() + ": unknown activation code " + std::to_string(code));
    layer.activation = static_cast<Activation>(code);
    model.layers.push_back(std::move(layer));
  }
  r.expect_end();
  try {
    model.validate();
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return model;
}

}  // namespace framesel
