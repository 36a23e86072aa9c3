#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "cads/rng.hpp"

namespace cads {

// Ground-truth 2D Gaussian mixture. Immutable after construction; provides
// the training dataset and exact scores of the noise-perturbed mixture.
struct GmmSpec {
  std::vector<double> weights;                 // sum to 1
  std::vector<Eigen::Vector2d> means;
  std::vector<Eigen::Matrix2d> covariances;    // symmetric positive-definite

  int num_components() const { return static_cast<int>(weights.size()); }
  void validate() const;
};

struct LabeledSample {
  Eigen::Vector2d point;
  int label = 0;
};

// side x side equally weighted isotropic components on a centered square grid.
GmmSpec make_grid_gmm(int side, double spacing, double std_dev);

// Draws, each tagged with its generating component. With a label, all draws
// come from that component.
std::vector<LabeledSample> gmm_sample(const GmmSpec& spec,
                                      std::optional<int> label, int n,
                                      RngStream& rng);

// Mixture of the forward-process-perturbed components: N(m, C) maps to
// N(alpha*m, alpha^2*C + sigma^2*I). Restricted to one component if given.
GmmSpec perturbed_spec(const GmmSpec& spec, double alpha, double sigma,
                       std::optional<int> label = std::nullopt);

// Exact gradient of the perturbed log density at z.
Eigen::Vector2d analytic_score(const GmmSpec& spec, const Eigen::Vector2d& z,
                               double alpha, double sigma,
                               std::optional<int> label = std::nullopt);

// log sum_k w_k N(z; m_k, C_k), log-sum-exp stabilized.
double gmm_log_density(const GmmSpec& spec, const Eigen::Vector2d& z);

// argmax_k w_k N(z; m_k, C_k); ties broken toward the lowest index.
int posterior_label(const GmmSpec& spec, const Eigen::Vector2d& z);

// Half-width of a box that contains the mixture comfortably: largest mean
// coordinate plus five standard deviations of the widest component.
double data_clip_bound(const GmmSpec& spec);

}  // namespace cads
