#include "cads/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace cads {

void SimilarityMatrix::validate() const {
  if (values.rows() != values.cols() || values.rows() < 1) {
    throw std::invalid_argument("SimilarityMatrix must be square");
  }
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    if (std::abs(values(i, i) - 1.0) > 1e-12) {
      throw std::invalid_argument("SimilarityMatrix diagonal must be 1");
    }
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      const double v = values(i, j);
      if (v < 0.0 || v > 1.0) {
        throw std::invalid_argument("SimilarityMatrix entries must be in [0,1]");
      }
      if (std::abs(v - values(j, i)) > 1e-12) {
        throw std::invalid_argument("SimilarityMatrix must be symmetric");
      }
    }
  }
}

SimilarityMatrix similarity_matrix(const std::vector<Eigen::Vector2d>& points,
                                   std::optional<double> bandwidth) {
  const int n = static_cast<int>(points.size());
  if (n < 2) throw std::invalid_argument("similarity_matrix needs n >= 2");
  if (bandwidth && *bandwidth <= 0.0) {
    throw std::invalid_argument("similarity_matrix bandwidth must be positive");
  }

  Eigen::MatrixXd d2(n, n);
  for (int i = 0; i < n; ++i) {
    d2(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      const double v = (points[i] - points[j]).squaredNorm();
      d2(i, j) = v;
      d2(j, i) = v;
    }
  }

  double h;
  if (bandwidth) {
    h = *bandwidth;
  } else {
    // Median heuristic over the upper triangle.
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) dists.push_back(std::sqrt(d2(i, j)));
    }
    const auto mid = dists.begin() + dists.size() / 2;
    std::nth_element(dists.begin(), mid, dists.end());
    h = *mid;
    if (h <= 0.0) h = 1.0;  // all points identical
  }

  SimilarityMatrix k;
  k.values = (-d2.array() / (2.0 * h * h)).exp().matrix();
  for (int i = 0; i < n; ++i) k.values(i, i) = 1.0;
  return k;
}

double vendi_score(const SimilarityMatrix& k) {
  k.validate();
  const int n = k.size();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(k.values / n,
                                                        Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("vendi_score: eigendecomposition failed");
  }
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double lambda = solver.eigenvalues()[i];
    if (lambda < -1e-6) {
      throw std::invalid_argument("vendi_score: similarity matrix is not PSD");
    }
    if (lambda <= 0.0) continue;  // 0 log 0 := 0; tiny negatives clamp to 0
    entropy -= lambda * std::log(lambda);
  }
  return std::exp(entropy);
}

double mss(const SimilarityMatrix& k) {
  k.validate();
  const double n = static_cast<double>(k.size());
  return k.values.sum() / (n * n);
}

namespace {

// Distance from each point to its k-th nearest neighbor within its own set.
std::vector<double> knn_radii(const std::vector<Eigen::Vector2d>& points, int k) {
  const int n = static_cast<int>(points.size());
  std::vector<double> radii(n);
  std::vector<double> d2(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) d2[j] = (points[i] - points[j]).squaredNorm();
    d2[i] = std::numeric_limits<double>::infinity();  // exclude self
    std::nth_element(d2.begin(), d2.begin() + (k - 1), d2.end());
    radii[i] = std::sqrt(d2[k - 1]);
  }
  return radii;
}

double manifold_hit_rate(const std::vector<Eigen::Vector2d>& queries,
                         const std::vector<Eigen::Vector2d>& anchors,
                         const std::vector<double>& radii) {
  long hits = 0;
  for (const auto& q : queries) {
    for (std::size_t j = 0; j < anchors.size(); ++j) {
      if ((q - anchors[j]).squaredNorm() <= radii[j] * radii[j]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / queries.size();
}

}  // namespace

PrecisionRecall knn_precision_recall(const std::vector<Eigen::Vector2d>& real,
                                     const std::vector<Eigen::Vector2d>& generated,
                                     int k) {
  if (k < 1) throw std::invalid_argument("knn_precision_recall needs k >= 1");
  if (static_cast<int>(real.size()) < k + 1 ||
      static_cast<int>(generated.size()) < k + 1) {
    throw std::invalid_argument("knn_precision_recall: sets need at least k+1 points");
  }
  const std::vector<double> real_radii = knn_radii(real, k);
  const std::vector<double> gen_radii = knn_radii(generated, k);
  PrecisionRecall pr;
  pr.precision = manifold_hit_rate(generated, real, real_radii);
  pr.recall = manifold_hit_rate(real, generated, gen_radii);
  return pr;
}

GaussianStats gaussian_stats(const std::vector<Eigen::Vector2d>& points) {
  if (points.empty()) throw std::invalid_argument("gaussian_stats: empty set");
  GaussianStats s;
  s.count = static_cast<long>(points.size());
  for (const auto& p : points) s.mean += p;
  s.mean /= static_cast<double>(s.count);
  for (const auto& p : points) {
    const Eigen::Vector2d d = p - s.mean;
    s.covariance += d * d.transpose();
  }
  s.covariance /= static_cast<double>(s.count);
  return s;
}

double frechet_2d(const GaussianStats& a, const GaussianStats& b) {
  // Tr sqrt(P) for a 2x2 matrix with non-negative eigenvalues:
  // sqrt(l1) + sqrt(l2) = sqrt(tr P + 2 sqrt(det P)).
  const Eigen::Matrix2d p = a.covariance * b.covariance;
  const double tr = p.trace();
  const double det = p.determinant();
  const double disc = tr * tr - 4.0 * det;
  const double root = std::sqrt(std::max(disc, 0.0));
  const double lambda_min = 0.5 * (tr - root);
  if (lambda_min < -1e-8) {
    throw std::invalid_argument("frechet_2d: covariance product has a negative eigenvalue");
  }
  const double det_clamped = std::max(det, 0.0);
  const double tr_sqrt = std::sqrt(std::max(tr + 2.0 * std::sqrt(det_clamped), 0.0));
  const double d2 = (a.mean - b.mean).squaredNorm() + a.covariance.trace() +
                    b.covariance.trace() - 2.0 * tr_sqrt;
  return std::max(d2, 0.0);
}

double alignment_accuracy(const std::vector<ChainResult>& results,
                          const GmmSpec& spec) {
  if (results.empty()) throw std::invalid_argument("alignment_accuracy: empty results");
  long correct = 0;
  for (const auto& r : results) {
    if (r.label < 0) {
      throw std::invalid_argument("alignment_accuracy: unconditional chain has no label");
    }
    if (posterior_label(spec, r.point) == r.label) ++correct;
  }
  return static_cast<double>(correct) / results.size();
}

double support_coverage(const std::vector<Eigen::Vector2d>& generated,
                        const GmmSpec& spec,
                        const std::vector<Eigen::Vector2d>& reference) {
  if (reference.empty()) throw std::invalid_argument("support_coverage: empty reference");
  if (generated.empty()) throw std::invalid_argument("support_coverage: empty sample set");
  std::vector<double> ref_logd;
  ref_logd.reserve(reference.size());
  for (const auto& p : reference) ref_logd.push_back(gmm_log_density(spec, p));
  // 1st percentile by the nearest-rank rule.
  const auto rank = static_cast<std::size_t>(
      std::max<long>(0, static_cast<long>(std::ceil(0.01 * ref_logd.size())) - 1));
  std::nth_element(ref_logd.begin(), ref_logd.begin() + rank, ref_logd.end());
  const double threshold = ref_logd[rank];

  long below = 0;
  for (const auto& p : generated) {
    if (gmm_log_density(spec, p) < threshold) ++below;
  }
  return static_cast<double>(below) / generated.size();
}

MetricsReport compute_report(const std::vector<ChainResult>& generated,
                             const std::vector<LabeledSample>& reference,
                             const GmmSpec& spec, int knn_k,
                             std::optional<double> bandwidth) {
  if (generated.empty()) throw std::invalid_argument("compute_report: no samples");
  if (reference.empty()) throw std::invalid_argument("compute_report: no reference");

  std::vector<Eigen::Vector2d> gen_points;
  gen_points.reserve(generated.size());
  std::map<int, std::vector<Eigen::Vector2d>> by_label;
  for (const auto& r : generated) {
    gen_points.push_back(r.point);
    by_label[r.label].push_back(r.point);
  }
  std::vector<Eigen::Vector2d> ref_points;
  ref_points.reserve(reference.size());
  for (const auto& s : reference) ref_points.push_back(s.point);

  MetricsReport report;
  const PrecisionRecall pr = knn_precision_recall(ref_points, gen_points, knn_k);
  report.precision = pr.precision;
  report.recall = pr.recall;
  report.fd2d = frechet_2d(gaussian_stats(ref_points), gaussian_stats(gen_points));
  report.alignment_accuracy = alignment_accuracy(generated, spec);
  report.support_coverage_rate = support_coverage(gen_points, spec, ref_points);

  double vendi_sum = 0.0;
  double mss_sum = 0.0;
  for (const auto& [label, points] : by_label) {
    PerConditionMetrics pc;
    pc.label = label;
    pc.count = static_cast<int>(points.size());
    if (points.size() >= 2) {
      const SimilarityMatrix k = similarity_matrix(points, bandwidth);
      pc.vendi = vendi_score(k);
      pc.mss = mss(k);
    } else {
      pc.vendi = 1.0;
      pc.mss = 1.0;
    }
    vendi_sum += pc.vendi;
    mss_sum += pc.mss;
    report.per_condition.push_back(pc);
  }
  report.vendi_mean = vendi_sum / report.per_condition.size();
  report.mss_mean = mss_sum / report.per_condition.size();
  return report;
}

std::string report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["recall"] = report.recall;
  j["precision"] = report.precision;
  j["vendi_mean"] = report.vendi_mean;
  j["mss_mean"] = report.mss_mean;
  j["fd2d"] = report.fd2d;
  j["alignment_accuracy"] = report.alignment_accuracy;
  j["support_coverage_rate"] = report.support_coverage_rate;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (const auto& pc : report.per_condition) {
    nlohmann::ordered_json row;
    row["label"] = pc.label;
    row["count"] = pc.count;
    row["vendi"] = pc.vendi;
    row["mss"] = pc.mss;
    per.push_back(row);
  }
  j["per_condition"] = per;
  return j.dump(2) + "\n";
}

void write_report_json(const std::string& path, const MetricsReport& report) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write report: " + path);
  os << report_to_json(report);
}

void write_per_condition_csv(const std::string& path, const MetricsReport& report) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write per-condition csv: " + path);
  os << "label,count,vendi,mss\n";
  char buf[128];
  for (const auto& pc : report.per_condition) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g\n", pc.label, pc.count,
                  pc.vendi, pc.mss);
    os << buf;
  }
}

}  // namespace cads
