#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "cads/denoiser.hpp"
#include "cads/gmm.hpp"
#include "cads/schedule.hpp"

namespace cads {

struct TrainConfig {
  int epochs = 60;
  int batch_size = 250;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double uncond_dropout_prob = 0.1;
  TargetType target_type = TargetType::kEpsilon;
  int samples_per_class = 1000;
  std::uint64_t seed = 1234;
  double t_min = 1e-3;  // lower bound on sampled training times

  bool operator==(const TrainConfig&) const = default;

  void validate() const;
};

// Gradients shaped like the model parameters.
struct DenoiserGrads {
  std::vector<DenseLayer> layers;
  Eigen::MatrixXd class_table;

  static DenoiserGrads zeros_like(const Denoiser& model);
};

// Flat parameter vector in checkpoint order: per layer W row-major then bias,
// then the class table row-major.
Eigen::VectorXd flatten_params(const Denoiser& model);
void set_params(Denoiser& model, const Eigen::VectorXd& flat);
Eigen::VectorXd flatten_grads(const DenoiserGrads& grads);

struct LossAndGrads {
  double loss = 0.0;
  DenoiserGrads grads;
};

// One stochastic objective evaluation: per item draws t ~ U[t_min, 1] and
// eps, forms z_t, drops the label to the null row with the configured
// probability, and returns the batch MSE against the eps or velocity target
// together with exact gradients for every parameter including the class
// table. Copy the stream to re-evaluate the same draws at perturbed
// parameters.
LossAndGrads training_loss(const Denoiser& model,
                           std::span<const LabeledSample> batch,
                           const DiffusionSchedule& schedule, RngStream& rng,
                           const TrainConfig& cfg);

class AdamOptimizer {
 public:
  AdamOptimizer(Eigen::Index dim, double learning_rate, double beta1,
                double beta2, double eps);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grads);
  int steps_taken() const { return t_; }

 private:
  Eigen::VectorXd m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
};

struct TrainResult {
  Denoiser model;
  std::vector<double> epoch_loss;  // mean batch loss per epoch
};

// Deterministic given cfg.seed: dataset draw, initialization, shuffling and
// objective noise all derive from it. Aborts if the loss goes non-finite.
TrainResult train(const GmmSpec& spec, const TrainConfig& cfg,
                  const DiffusionSchedule& schedule);

}  // namespace cads
