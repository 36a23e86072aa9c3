#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "cads/gmm.hpp"
#include "cads/sampler.hpp"

namespace cads {

// Symmetric kernel matrix with unit diagonal and entries in [0,1].
struct SimilarityMatrix {
  Eigen::MatrixXd values;

  int size() const { return static_cast<int>(values.rows()); }
  void validate() const;
};

// Gaussian RBF similarity; bandwidth defaults to the median pairwise
// distance. All-identical point sets get a unit bandwidth and an all-ones
// matrix.
SimilarityMatrix similarity_matrix(const std::vector<Eigen::Vector2d>& points,
                                   std::optional<double> bandwidth = std::nullopt);

// Effective number of distinct samples: exp of the von Neumann entropy of
// K/n. 1 for identical items, n for fully dissimilar ones.
double vendi_score(const SimilarityMatrix& k);

// Mean over all n^2 similarity entries.
double mss(const SimilarityMatrix& k);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

// k-NN manifold estimator: a point lies on the other set's manifold if it is
// within some reference point's distance-to-own-kth-neighbor ball.
PrecisionRecall knn_precision_recall(const std::vector<Eigen::Vector2d>& real,
                                     const std::vector<Eigen::Vector2d>& generated,
                                     int k);

struct GaussianStats {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  long count = 0;
};

GaussianStats gaussian_stats(const std::vector<Eigen::Vector2d>& points);

// Frechet distance between two 2D Gaussians, closed-form 2x2 square root.
double frechet_2d(const GaussianStats& a, const GaussianStats& b);

// Fraction of chains whose final point the mixture posterior assigns to the
// conditioned component.
double alignment_accuracy(const std::vector<ChainResult>& results,
                          const GmmSpec& spec);

// Fraction of generated points whose log density falls below the 1st
// percentile of the reference set's log densities. Lower is better.
double support_coverage(const std::vector<Eigen::Vector2d>& generated,
                        const GmmSpec& spec,
                        const std::vector<Eigen::Vector2d>& reference);

struct PerConditionMetrics {
  int label = 0;
  int count = 0;
  double vendi = 0.0;
  double mss = 0.0;
};

struct MetricsReport {
  double recall = 0.0;
  double precision = 0.0;
  double vendi_mean = 0.0;  // arithmetic mean over conditions
  double mss_mean = 0.0;
  double fd2d = 0.0;
  double alignment_accuracy = 0.0;
  double support_coverage_rate = 0.0;
  std::vector<PerConditionMetrics> per_condition;
};

// Full metric suite for one sample run against a labeled reference set.
MetricsReport compute_report(const std::vector<ChainResult>& generated,
                             const std::vector<LabeledSample>& reference,
                             const GmmSpec& spec, int knn_k,
                             std::optional<double> bandwidth = std::nullopt);

// JSON with stable key order; per-condition table as CSV.
std::string report_to_json(const MetricsReport& report);
void write_report_json(const std::string& path, const MetricsReport& report);
void write_per_condition_csv(const std::string& path, const MetricsReport& report);

}  // namespace cads
