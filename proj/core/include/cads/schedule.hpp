#pragma once

#include <Eigen/Core>
#include <string>
#include <string_view>
#include <vector>

#include "cads/rng.hpp"

namespace cads {

// Discretized variance-preserving noise schedule on the uniform grid
// t_i = i/N, i = 0..N. alpha_t^2 + sigma_t^2 = 1 at every grid point.
struct DiffusionSchedule {
  int num_steps = 0;            // N
  std::vector<double> alphas;   // N+1 signal scales, strictly decreasing
  std::vector<double> sigmas;   // N+1 noise scales, strictly increasing

  double time_at(int i) const { return static_cast<double>(i) / num_steps; }

  // Continuous-time scales of the same process; the grid arrays above are
  // this function sampled at t_i.
  void scales_at(double t, double& alpha, double& sigma) const;
};

// Continuous-time cosine VP scales. t is squeezed into [t_min, t_max] so the
// endpoints stay strictly inside (0,1) for any grid resolution.
inline constexpr double kScheduleTimeMin = 0.001;
inline constexpr double kScheduleTimeMax = 0.999;
void cosine_vp_scales(double t, double& alpha, double& sigma);

DiffusionSchedule build_cosine_vp_schedule(int num_steps);

// Annealing weight gamma(t): 1 = clean condition, 0 = fully noised.
enum class AnnealVariant { kPiecewiseLinear, kPolynomial };

struct AnnealSchedule {
  AnnealVariant variant = AnnealVariant::kPiecewiseLinear;
  double tau1 = 0.5;  // piecewise-linear: clean below tau1
  double tau2 = 0.9;  // piecewise-linear: fully noised above tau2
  double tau = 0.5;   // polynomial: clean below tau
  int degree = 2;     // polynomial degree

  static AnnealSchedule piecewise_linear(double tau1, double tau2);
  static AnnealSchedule polynomial(double tau, int degree);
};

double anneal_weight(const AnnealSchedule& schedule, double t);

enum class NoiseFamily { kGaussian, kUniform, kLaplace, kGamma };

NoiseFamily noise_family_from_string(std::string_view name);
std::string to_string(NoiseFamily family);

struct CadsConfig {
  double noise_scale = 0.15;                          // s
  double mixing_factor = 1.0;                         // psi
  bool rescale = true;
  NoiseFamily noise_distribution = NoiseFamily::kGaussian;
  AnnealSchedule anneal = AnnealSchedule::piecewise_linear(0.5, 0.9);
};

// i.i.d. draws from the named family, affinely standardized to zero mean and
// unit variance. Each family consumes a fixed number of uniforms per entry.
Eigen::VectorXd sample_unit_noise(NoiseFamily family, int dim, RngStream& rng);

// Pulls a corrupted condition back toward the clean statistics (mu_in,
// sigma_in), then mixes with the raw corrupted vector by psi.
Eigen::VectorXd rescale_condition(const Eigen::VectorXd& y_hat, double mu_in,
                                  double sigma_in, double psi);

// y_hat = sqrt(gamma) * y + s * sqrt(1 - gamma) * n, optionally rescaled.
// When the noise amplitude is exactly zero no randomness is consumed, and the
// rescale at psi = 1 is resolved algebraically so that a zero-noise pass
// returns y bit-for-bit.
Eigen::VectorXd corrupt_condition(const Eigen::VectorXd& y, double t,
                                  const CadsConfig& cfg, RngStream& rng);

// Guidance weight modulated by the annealing schedule.
double dynamic_cfg_weight(double w_cfg, double t, const AnnealSchedule& schedule);

}  // namespace cads
