#include "cads/gmm.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cads {

namespace {

// log N(z; m, C) for a 2x2 SPD covariance, closed-form inverse/determinant.
double log_gaussian_2d(const Eigen::Vector2d& z, const Eigen::Vector2d& m,
                       const Eigen::Matrix2d& c) {
  const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
  const Eigen::Vector2d d = z - m;
  const double quad =
      (c(1, 1) * d[0] * d[0] - (c(0, 1) + c(1, 0)) * d[0] * d[1] +
       c(0, 0) * d[1] * d[1]) /
      det;
  return -std::log(2.0 * M_PI) - 0.5 * std::log(det) - 0.5 * quad;
}

Eigen::Vector2d gaussian_score_2d(const Eigen::Vector2d& z,
                                  const Eigen::Vector2d& m,
                                  const Eigen::Matrix2d& c) {
  const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
  const Eigen::Vector2d d = z - m;
  Eigen::Vector2d cinv_d;
  cinv_d[0] = (c(1, 1) * d[0] - c(0, 1) * d[1]) / det;
  cinv_d[1] = (-c(1, 0) * d[0] + c(0, 0) * d[1]) / det;
  return -cinv_d;
}

}  // namespace

void GmmSpec::validate() const {
  if (weights.empty() || means.size() != weights.size() ||
      covariances.size() != weights.size()) {
    throw std::invalid_argument("GmmSpec: mismatched component arrays");
  }
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("GmmSpec: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("GmmSpec: weights must sum to 1");
  }
  for (const auto& c : covariances) {
    const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
    if (det <= 0.0 || c.trace() <= 0.0) {
      throw std::invalid_argument("GmmSpec: covariance not positive-definite");
    }
  }
}

GmmSpec make_grid_gmm(int side, double spacing, double std_dev) {
  if (side < 1) throw std::invalid_argument("make_grid_gmm needs side >= 1");
  if (spacing <= 0.0 || std_dev <= 0.0) {
    throw std::invalid_argument("make_grid_gmm needs positive spacing and std");
  }
  GmmSpec spec;
  const int k = side * side;
  const double offset = 0.5 * (side - 1) * spacing;
  spec.weights.assign(k, 1.0 / k);
  spec.means.reserve(k);
  spec.covariances.reserve(k);
  for (int row = 0; row < side; ++row) {
    for (int col = 0; col < side; ++col) {
      spec.means.emplace_back(col * spacing - offset, row * spacing - offset);
      spec.covariances.push_back(std_dev * std_dev * Eigen::Matrix2d::Identity());
    }
  }
  return spec;
}

std::vector<LabeledSample> gmm_sample(const GmmSpec& spec,
                                      std::optional<int> label, int n,
                                      RngStream& rng) {
  if (n < 1) throw std::invalid_argument("gmm_sample needs n >= 1");
  if (label && (*label < 0 || *label >= spec.num_components())) {
    throw std::out_of_range("gmm_sample: label out of range");
  }
  std::vector<LabeledSample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    int k;
    if (label) {
      k = *label;
    } else {
      // Inverse-CDF draw over the component weights.
      const double u = rng.uniform01();
      double acc = 0.0;
      k = spec.num_components() - 1;
      for (int j = 0; j < spec.num_components(); ++j) {
        acc += spec.weights[j];
        if (u < acc) {
          k = j;
          break;
        }
      }
    }
    const Eigen::Matrix2d& c = spec.covariances[k];
    // Closed-form 2x2 Cholesky factor.
    const double l11 = std::sqrt(c(0, 0));
    const double l21 = c(1, 0) / l11;
    const double l22 = std::sqrt(c(1, 1) - l21 * l21);
    const double n0 = rng.normal();
    const double n1 = rng.normal();
    Eigen::Vector2d point = spec.means[k];
    point[0] += l11 * n0;
    point[1] += l21 * n0 + l22 * n1;
    out.push_back({point, k});
  }
  return out;
}

GmmSpec perturbed_spec(const GmmSpec& spec, double alpha, double sigma,
                       std::optional<int> label) {
  if (!(alpha > 0.0 && alpha <= 1.0) || !(sigma >= 0.0 && sigma < 1.0)) {
    throw std::invalid_argument("perturbed_spec: alpha in (0,1], sigma in [0,1)");
  }
  GmmSpec out;
  const double a2 = alpha * alpha;
  const double s2 = sigma * sigma;
  auto push = [&](int k, double weight) {
    out.weights.push_back(weight);
    out.means.push_back(alpha * spec.means[k]);
    out.covariances.push_back(a2 * spec.covariances[k] +
                              s2 * Eigen::Matrix2d::Identity());
  };
  if (label) {
    if (*label < 0 || *label >= spec.num_components()) {
      throw std::out_of_range("perturbed_spec: label out of range");
    }
    push(*label, 1.0);
  } else {
    for (int k = 0; k < spec.num_components(); ++k) push(k, spec.weights[k]);
  }
  return out;
}

Eigen::Vector2d analytic_score(const GmmSpec& spec, const Eigen::Vector2d& z,
                               double alpha, double sigma,
                               std::optional<int> label) {
  const GmmSpec p = perturbed_spec(spec, alpha, sigma, label);
  const int k = p.num_components();
  // Responsibilities via log-sum-exp; score is the responsibility-weighted
  // sum of per-component Gaussian scores.
  std::vector<double> logits(k);
  double max_logit = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < k; ++j) {
    logits[j] = std::log(p.weights[j]) + log_gaussian_2d(z, p.means[j], p.covariances[j]);
    max_logit = std::max(max_logit, logits[j]);
  }
  double denom = 0.0;
  for (int j = 0; j < k; ++j) denom += std::exp(logits[j] - max_logit);
  Eigen::Vector2d score = Eigen::Vector2d::Zero();
  for (int j = 0; j < k; ++j) {
    const double r = std::exp(logits[j] - max_logit) / denom;
    if (r > 0.0) score += r * gaussian_score_2d(z, p.means[j], p.covariances[j]);
  }
  return score;
}

double gmm_log_density(const GmmSpec& spec, const Eigen::Vector2d& z) {
  const int k = spec.num_components();
  double max_logit = -std::numeric_limits<double>::infinity();
  std::vector<double> logits(k);
  for (int j = 0; j < k; ++j) {
    logits[j] = std::log(spec.weights[j]) +
                log_gaussian_2d(z, spec.means[j], spec.covariances[j]);
    max_logit = std::max(max_logit, logits[j]);
  }
  double acc = 0.0;
  for (int j = 0; j < k; ++j) acc += std::exp(logits[j] - max_logit);
  return max_logit + std::log(acc);
}

int posterior_label(const GmmSpec& spec, const Eigen::Vector2d& z) {
  int best = 0;
  double best_logit = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < spec.num_components(); ++j) {
    const double logit = std::log(spec.weights[j]) +
                         log_gaussian_2d(z, spec.means[j], spec.covariances[j]);
    if (logit > best_logit) {
      best_logit = logit;
      best = j;
    }
  }
  return best;
}

double data_clip_bound(const GmmSpec& spec) {
  double extent = 0.0;
  double max_std = 0.0;
  for (int k = 0; k < spec.num_components(); ++k) {
    extent = std::max({extent, std::abs(spec.means[k][0]), std::abs(spec.means[k][1])});
    max_std = std::max(max_std, std::sqrt(spec.covariances[k].trace() / 2.0));
  }
  return extent + 5.0 * max_std;
}

}  // namespace cads
