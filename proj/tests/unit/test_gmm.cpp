#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <map>

#include "cads/gmm.hpp"

using namespace cads;

namespace {

// Central finite difference of the perturbed log density; the independent
// oracle for analytic_score.
Eigen::Vector2d fd_score(const GmmSpec& spec, const Eigen::Vector2d& z,
                         double alpha, double sigma, std::optional<int> label,
                         double h) {
  const GmmSpec p = perturbed_spec(spec, alpha, sigma, label);
  Eigen::Vector2d g;
  for (int d = 0; d < 2; ++d) {
    Eigen::Vector2d hi = z, lo = z;
    hi[d] += h;
    lo[d] -= h;
    g[d] = (gmm_log_density(p, hi) - gmm_log_density(p, lo)) / (2.0 * h);
  }
  return g;
}

GmmSpec random_spec(RngStream& rng, int k) {
  GmmSpec spec;
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    const double w = 0.2 + rng.uniform01();
    spec.weights.push_back(w);
    total += w;
    spec.means.emplace_back(4.0 * (rng.uniform01() - 0.5),
                            4.0 * (rng.uniform01() - 0.5));
    Eigen::Matrix2d a;
    a << 0.5 + rng.uniform01(), 0.4 * (rng.uniform01() - 0.5),
        0.4 * (rng.uniform01() - 0.5), 0.5 + rng.uniform01();
    spec.covariances.push_back(a * a.transpose() +
                               0.05 * Eigen::Matrix2d::Identity());
  }
  for (auto& w : spec.weights) w /= total;
  return spec;
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("grid construction") {
  const GmmSpec spec = make_grid_gmm(5, 2.0, 0.1);
  spec.validate();
  CHECK(spec.num_components() == 25);
  for (double w : spec.weights) CHECK(w == doctest::Approx(0.04).epsilon(1e-12));

  const GmmSpec single = make_grid_gmm(1, 2.0, 0.5);
  CHECK(single.num_components() == 1);
  CHECK(single.means[0] == Eigen::Vector2d::Zero());

  const GmmSpec four = make_grid_gmm(2, 2.0, 0.1);
  std::vector<Eigen::Vector2d> expected = {
      {-1.0, -1.0}, {1.0, -1.0}, {-1.0, 1.0}, {1.0, 1.0}};
  for (int i = 0; i < 4; ++i) CHECK(four.means[i] == expected[i]);
}

TEST_CASE("spec validation") {
  GmmSpec bad = make_grid_gmm(2, 1.0, 0.1);
  bad.weights[0] = 0.5;  // breaks the sum
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  GmmSpec nonspd = make_grid_gmm(2, 1.0, 0.1);
  nonspd.covariances[1] << 1.0, 2.0, 2.0, 1.0;  // indefinite
  CHECK_THROWS_AS(nonspd.validate(), std::invalid_argument);
}

TEST_CASE("sampling moments and labels") {
  const GmmSpec single = make_grid_gmm(1, 1.0, 0.1);
  RngStream rng(21);
  const auto draws = gmm_sample(single, std::nullopt, 100000, rng);
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& s : draws) mean += s.point;
  mean /= draws.size();
  CHECK(mean.norm() < 0.005);

  const GmmSpec grid = make_grid_gmm(5, 2.0, 0.1);
  RngStream rng2(22);
  for (const auto& s : gmm_sample(grid, 3, 200, rng2)) CHECK(s.label == 3);

  RngStream rng3(23);
  std::map<int, int> freq;
  const int n = 100000;
  for (const auto& s : gmm_sample(grid, std::nullopt, n, rng3)) ++freq[s.label];
  for (int k = 0; k < 25; ++k) {
    const double f = static_cast<double>(freq[k]) / n;
    CHECK(f >= 0.03);
    CHECK(f <= 0.05);
  }
  CHECK_THROWS_AS(gmm_sample(grid, 25, 1, rng3), std::out_of_range);
}

TEST_CASE("perturbation arithmetic") {
  const GmmSpec grid = make_grid_gmm(3, 2.0, 0.3);
  const GmmSpec same = perturbed_spec(grid, 1.0, 0.0);
  for (int k = 0; k < grid.num_components(); ++k) {
    CHECK((same.means[k] - grid.means[k]).norm() == 0.0);
    CHECK((same.covariances[k] - grid.covariances[k]).norm() == 0.0);
  }

  GmmSpec one;
  one.weights = {1.0};
  one.means = {{1.0, 0.0}};
  one.covariances = {Eigen::Matrix2d::Identity()};
  const GmmSpec p = perturbed_spec(one, 0.6, 0.8);
  CHECK((p.means[0] - Eigen::Vector2d(0.6, 0.0)).norm() < 1e-15);
  CHECK((p.covariances[0] - Eigen::Matrix2d::Identity()).norm() < 1e-15);

  RngStream rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const GmmSpec spec = random_spec(rng, 4);
    const GmmSpec q = perturbed_spec(spec, 0.7071, 0.7071);
    for (const auto& c : q.covariances) {
      CHECK(c(0, 1) == c(1, 0));
      CHECK(c.determinant() > 0.0);
      CHECK(c.trace() > 0.0);
    }
  }
}

TEST_CASE("analytic score closed forms") {
  GmmSpec std_normal;
  std_normal.weights = {1.0};
  std_normal.means = {{0.0, 0.0}};
  std_normal.covariances = {Eigen::Matrix2d::Identity()};
  RngStream rng(41);
  for (int i = 0; i < 10; ++i) {
    const Eigen::Vector2d z(rng.normal(), rng.normal());
    const Eigen::Vector2d s = analytic_score(std_normal, z, 1.0, 0.0);
    CHECK((s + z).norm() < 1e-12);
  }

  GmmSpec shifted;
  shifted.weights = {1.0};
  shifted.means = {{1.0, 0.0}};
  shifted.covariances = {Eigen::Matrix2d::Identity()};
  const Eigen::Vector2d z(0.3, -0.4);
  const Eigen::Vector2d s = analytic_score(shifted, z, 0.6, 0.8);
  CHECK((s + (z - Eigen::Vector2d(0.6, 0.0))).norm() < 1e-12);
}

TEST_CASE("score matches finite differences") {
  RngStream rng(51);
  const GmmSpec grid = make_grid_gmm(5, 2.0, 0.1);
  // the 25-component toy mixture
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector2d z(6.0 * (rng.uniform01() - 0.5),
                            6.0 * (rng.uniform01() - 0.5));
    const double alpha = 0.3 + 0.65 * rng.uniform01();
    const double sigma = std::sqrt(1.0 - alpha * alpha);
    const Eigen::Vector2d analytic = analytic_score(grid, z, alpha, sigma);
    const Eigen::Vector2d numeric = fd_score(grid, z, alpha, sigma, {}, 1e-5);
    CHECK((analytic - numeric).norm() / numeric.norm() < 1e-4);
  }
  // random mixtures, conditional and unconditional
  for (int i = 0; i < 100; ++i) {
    const GmmSpec spec = random_spec(rng, 1 + static_cast<int>(rng.below(5)));
    const Eigen::Vector2d z(8.0 * (rng.uniform01() - 0.5),
                            8.0 * (rng.uniform01() - 0.5));
    const double alpha = 0.2 + 0.79 * rng.uniform01();
    const double sigma = 0.95 * std::sqrt(1.0 - alpha * alpha);
    std::optional<int> label;
    if (rng.uniform01() < 0.5) {
      label = static_cast<int>(rng.below(spec.num_components()));
    }
    const Eigen::Vector2d analytic = analytic_score(spec, z, alpha, sigma, label);
    const Eigen::Vector2d numeric = fd_score(spec, z, alpha, sigma, label, 1e-5);
    CHECK((analytic - numeric).norm() / std::max(numeric.norm(), 1e-8) < 1e-4);
  }
}

TEST_CASE("log density closed forms") {
  GmmSpec std_normal;
  std_normal.weights = {1.0};
  std_normal.means = {{0.0, 0.0}};
  std_normal.covariances = {Eigen::Matrix2d::Identity()};
  CHECK(gmm_log_density(std_normal, {0.0, 0.0}) ==
        doctest::Approx(-std::log(2.0 * M_PI)).epsilon(1e-12));

  // equidistant point between two equal components: weights cancel
  GmmSpec two;
  two.weights = {0.5, 0.5};
  two.means = {{-1.0, 0.0}, {1.0, 0.0}};
  two.covariances = {Eigen::Matrix2d::Identity(), Eigen::Matrix2d::Identity()};
  const Eigen::Vector2d mid(0.0, 0.7);
  GmmSpec left;
  left.weights = {1.0};
  left.means = {two.means[0]};
  left.covariances = {two.covariances[0]};
  CHECK(gmm_log_density(two, mid) ==
        doctest::Approx(gmm_log_density(left, mid)).epsilon(1e-12));
}

TEST_CASE("log density equals the naive sum at moderate scale") {
  const GmmSpec grid = make_grid_gmm(5, 2.0, 0.1);
  RngStream rng(61);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector2d z(4.0 * (rng.uniform01() - 0.5),
                            4.0 * (rng.uniform01() - 0.5));
    double naive = 0.0;
    for (int k = 0; k < grid.num_components(); ++k) {
      const Eigen::Matrix2d& c = grid.covariances[k];
      const Eigen::Vector2d d = z - grid.means[k];
      const double det = c.determinant();
      const double quad = d.dot(c.inverse() * d);
      naive += grid.weights[k] * std::exp(-0.5 * quad) / (2.0 * M_PI * std::sqrt(det));
    }
    CHECK(gmm_log_density(grid, z) ==
          doctest::Approx(std::log(naive)).epsilon(1e-10));
  }
}

TEST_CASE("density normalizes to one") {
  const GmmSpec grid = make_grid_gmm(3, 2.0, 0.15);
  const double lo = -4.0, hi = 4.0;
  const int cells = 400;
  const double h = (hi - lo) / cells;
  double mass = 0.0;
  for (int i = 0; i < cells; ++i) {
    for (int j = 0; j < cells; ++j) {
      const Eigen::Vector2d z(lo + (i + 0.5) * h, lo + (j + 0.5) * h);
      mass += std::exp(gmm_log_density(grid, z)) * h * h;
    }
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("posterior label") {
  const GmmSpec grid = make_grid_gmm(5, 2.0, 0.1);
  CHECK(posterior_label(grid, grid.means[7]) == 7);

  GmmSpec two;
  two.weights = {0.5, 0.5};
  two.means = {{-1.0, 0.0}, {1.0, 0.0}};
  two.covariances = {Eigen::Matrix2d::Identity(), Eigen::Matrix2d::Identity()};
  CHECK(posterior_label(two, {0.0, 0.0}) == 0);  // tie -> lowest index

  RngStream rng(71);
  int correct = 0;
  const int n = 1000;
  const auto draws = gmm_sample(grid, std::nullopt, n, rng);
  for (const auto& s : draws) {
    if (posterior_label(grid, s.point) == s.label) ++correct;
  }
  CHECK(correct >= 990);
}

TEST_CASE("posterior label ignores weight rescaling") {
  const GmmSpec grid = make_grid_gmm(3, 1.0, 0.4);
  GmmSpec scaled = grid;
  for (auto& w : scaled.weights) w *= 17.0;  // argmax unchanged
  RngStream rng(81);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector2d z(3.0 * (rng.uniform01() - 0.5),
                            3.0 * (rng.uniform01() - 0.5));
    CHECK(posterior_label(grid, z) == posterior_label(scaled, z));
  }
}

TEST_CASE("clip bound covers the grid") {
  const GmmSpec grid = make_grid_gmm(5, 2.0, 0.1);
  CHECK(data_clip_bound(grid) == doctest::Approx(4.5).epsilon(1e-12));
}

}  // TEST_SUITE
