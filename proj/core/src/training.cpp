#include "cads/training.hpp"

#include <cmath>
#include <stdexcept>

namespace cads {

namespace {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double silu_derivative(double x) {
  const double s = logistic(x);
  return s * (1.0 + x * (1.0 - s));
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("train.epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
  if (learning_rate <= 0.0) throw std::invalid_argument("train.learning_rate must be > 0");
  if (!(uncond_dropout_prob >= 0.0 && uncond_dropout_prob < 1.0)) {
    throw std::invalid_argument("train.uncond_dropout_prob must be in [0,1)");
  }
  if (samples_per_class < 1) {
    throw std::invalid_argument("train.samples_per_class must be >= 1");
  }
  if (!(t_min > 0.0 && t_min < 1.0)) {
    throw std::invalid_argument("train.t_min must be in (0,1)");
  }
}

DenoiserGrads DenoiserGrads::zeros_like(const Denoiser& model) {
  DenoiserGrads g;
  g.layers.reserve(model.layers.size());
  for (const auto& layer : model.layers) {
    DenseLayer zero;
    zero.weight = Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols());
    zero.bias = Eigen::VectorXd::Zero(layer.bias.size());
    g.layers.push_back(std::move(zero));
  }
  g.class_table =
      Eigen::MatrixXd::Zero(model.class_table.rows(), model.class_table.cols());
  return g;
}

namespace {

template <typename LayerRange, typename TableT>
Eigen::VectorXd flatten_impl(const LayerRange& layers, const TableT& table,
                             std::size_t total) {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(total));
  Eigen::Index at = 0;
  for (const auto& layer : layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        flat[at++] = layer.weight(r, c);
      }
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) flat[at++] = layer.bias[i];
  }
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.cols(); ++c) flat[at++] = table(r, c);
  }
  return flat;
}

}  // namespace

Eigen::VectorXd flatten_params(const Denoiser& model) {
  return flatten_impl(model.layers, model.class_table, model.num_params());
}

Eigen::VectorXd flatten_grads(const DenoiserGrads& grads) {
  std::size_t total = static_cast<std::size_t>(grads.class_table.size());
  for (const auto& layer : grads.layers) {
    total += static_cast<std::size_t>(layer.weight.size()) + layer.bias.size();
  }
  return flatten_impl(grads.layers, grads.class_table, total);
}

void set_params(Denoiser& model, const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(model.num_params())) {
    throw std::invalid_argument("set_params: size mismatch");
  }
  Eigen::Index at = 0;
  for (auto& layer : model.layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = flat[at++];
      }
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = flat[at++];
  }
  for (Eigen::Index r = 0; r < model.class_table.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.class_table.cols(); ++c) {
      model.class_table(r, c) = flat[at++];
    }
  }
}

LossAndGrads training_loss(const Denoiser& model,
                           std::span<const LabeledSample> batch,
                           const DiffusionSchedule& schedule, RngStream& rng,
                           const TrainConfig& cfg) {
  const int b = static_cast<int>(batch.size());
  if (b == 0) throw std::invalid_argument("training_loss: empty batch");

  // Per-item draws in a fixed order: t, eps, dropout.
  std::vector<double> times(b);
  Eigen::MatrixXd eps(kDataDim, b);
  std::vector<int> rows(b);  // class-table row used per item
  for (int i = 0; i < b; ++i) {
    times[i] = cfg.t_min + (1.0 - cfg.t_min) * rng.uniform01();
    eps(0, i) = rng.normal();
    eps(1, i) = rng.normal();
    const bool drop = rng.uniform01() < cfg.uncond_dropout_prob;
    rows[i] = drop ? model.num_classes : batch[i].label;
    if (rows[i] < 0 || rows[i] > model.num_classes) {
      throw std::out_of_range("training_loss: label out of range");
    }
  }

  const int in_dim = model.input_dim();
  Eigen::MatrixXd x0(in_dim, b);
  Eigen::MatrixXd target(kDataDim, b);
  for (int i = 0; i < b; ++i) {
    double alpha, sigma;
    schedule.scales_at(times[i], alpha, sigma);
    const Eigen::Vector2d zt =
        alpha * batch[i].point + sigma * eps.col(i);
    x0.block<kDataDim, 1>(0, i) = zt;
    x0.block<kTimeEmbedDim, 1>(kDataDim, i) = time_embedding(times[i]);
    x0.block<kClassEmbedDim, 1>(kDataDim + kTimeEmbedDim, i) =
        model.class_table.row(rows[i]).transpose();
    if (cfg.target_type == TargetType::kEpsilon) {
      target.col(i) = eps.col(i);
    } else {
      target.col(i) = alpha * eps.col(i) - sigma * batch[i].point;
    }
  }

  // Forward with cached pre-activations.
  const int depth = static_cast<int>(model.layers.size());
  std::vector<Eigen::MatrixXd> pre(depth);       // W h + b
  std::vector<Eigen::MatrixXd> act(depth + 1);   // act[0] = inputs
  act[0] = x0;
  for (int l = 0; l < depth; ++l) {
    pre[l] = (model.layers[l].weight * act[l]).colwise() + model.layers[l].bias;
    if (l + 1 < depth) {
      act[l + 1] = pre[l].unaryExpr(
          [](double v) { return v * logistic(v); });
    } else {
      act[l + 1] = pre[l];  // linear head
    }
  }

  const Eigen::MatrixXd diff = act[depth] - target;
  LossAndGrads out;
  out.loss = diff.squaredNorm() / b;
  out.grads = DenoiserGrads::zeros_like(model);

  // Reverse pass.
  Eigen::MatrixXd delta = (2.0 / b) * diff;
  for (int l = depth - 1; l >= 0; --l) {
    out.grads.layers[l].weight.noalias() = delta * act[l].transpose();
    out.grads.layers[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = model.layers[l].weight.transpose() * delta;
      delta = back.cwiseProduct(
          pre[l - 1].unaryExpr([](double v) { return silu_derivative(v); }));
    } else {
      const Eigen::MatrixXd dx0 = model.layers[0].weight.transpose() * delta;
      for (int i = 0; i < b; ++i) {
        out.grads.class_table.row(rows[i]) +=
            dx0.block<kClassEmbedDim, 1>(kDataDim + kTimeEmbedDim, i).transpose();
      }
    }
  }
  return out;
}

AdamOptimizer::AdamOptimizer(Eigen::Index dim, double learning_rate,
                             double beta1, double beta2, double eps)
    : m_(Eigen::VectorXd::Zero(dim)),
      v_(Eigen::VectorXd::Zero(dim)),
      lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {}

void AdamOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grads) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grads;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grads.cwiseProduct(grads);
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  params.array() -=
      lr_ * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + eps_);
}

TrainResult train(const GmmSpec& spec, const TrainConfig& cfg,
                  const DiffusionSchedule& schedule) {
  spec.validate();
  cfg.validate();

  RngStream dataset_rng =
      RngStream::derive(cfg.seed, 0, StreamPurpose::kDataset);
  std::vector<LabeledSample> dataset;
  dataset.reserve(static_cast<std::size_t>(spec.num_components()) *
                  cfg.samples_per_class);
  for (int k = 0; k < spec.num_components(); ++k) {
    auto draws = gmm_sample(spec, k, cfg.samples_per_class, dataset_rng);
    dataset.insert(dataset.end(), draws.begin(), draws.end());
  }

  TrainResult result{
      Denoiser::create(spec.num_components(), cfg.target_type, cfg.seed), {}};
  Eigen::VectorXd params = flatten_params(result.model);
  AdamOptimizer adam(params.size(), cfg.learning_rate, cfg.adam_beta1,
                     cfg.adam_beta2, cfg.adam_eps);
  RngStream train_rng = RngStream::derive(cfg.seed, 0, StreamPurpose::kTraining);

  std::vector<int> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::vector<LabeledSample> batch;
  batch.reserve(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates from the training stream.
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const auto j = train_rng.below(i + 1);
      std::swap(order[i], order[j]);
    }
    double epoch_sum = 0.0;
    int num_batches = 0;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      const std::size_t end = std::min(at + cfg.batch_size, order.size());
      batch.clear();
      for (std::size_t i = at; i < end; ++i) batch.push_back(dataset[order[i]]);
      auto eval = training_loss(result.model, batch, schedule, train_rng, cfg);
      if (!std::isfinite(eval.loss)) {
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch));
      }
      adam.step(params, flatten_grads(eval.grads));
      set_params(result.model, params);
      epoch_sum += eval.loss;
      ++num_batches;
    }
    result.epoch_loss.push_back(epoch_sum / num_batches);
  }
  return result;
}

}  // namespace cads
