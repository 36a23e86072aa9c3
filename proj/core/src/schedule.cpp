#include "cads/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace cads {

void cosine_vp_scales(double t, double& alpha, double& sigma) {
  const double squeezed =
      kScheduleTimeMin + (kScheduleTimeMax - kScheduleTimeMin) * t;
  alpha = std::cos(0.5 * M_PI * squeezed);
  sigma = std::sin(0.5 * M_PI * squeezed);
}

void DiffusionSchedule::scales_at(double t, double& alpha, double& sigma) const {
  cosine_vp_scales(t, alpha, sigma);
}

DiffusionSchedule build_cosine_vp_schedule(int num_steps) {
  if (num_steps < 2) {
    throw std::invalid_argument("diffusion schedule needs num_steps >= 2");
  }
  DiffusionSchedule schedule;
  schedule.num_steps = num_steps;
  schedule.alphas.resize(num_steps + 1);
  schedule.sigmas.resize(num_steps + 1);
  for (int i = 0; i <= num_steps; ++i) {
    cosine_vp_scales(schedule.time_at(i), schedule.alphas[i], schedule.sigmas[i]);
  }
  return schedule;
}

AnnealSchedule AnnealSchedule::piecewise_linear(double tau1, double tau2) {
  if (!(0.0 <= tau1 && tau1 < tau2 && tau2 <= 1.0)) {
    throw std::invalid_argument("piecewise-linear anneal needs 0 <= tau1 < tau2 <= 1");
  }
  AnnealSchedule s;
  s.variant = AnnealVariant::kPiecewiseLinear;
  s.tau1 = tau1;
  s.tau2 = tau2;
  return s;
}

AnnealSchedule AnnealSchedule::polynomial(double tau, int degree) {
  if (!(0.0 <= tau && tau < 1.0)) {
    throw std::invalid_argument("polynomial anneal needs 0 <= tau < 1");
  }
  if (degree < 1) {
    throw std::invalid_argument("polynomial anneal needs degree >= 1");
  }
  AnnealSchedule s;
  s.variant = AnnealVariant::kPolynomial;
  s.tau = tau;
  s.degree = degree;
  return s;
}

double anneal_weight(const AnnealSchedule& schedule, double t) {
  switch (schedule.variant) {
    case AnnealVariant::kPiecewiseLinear:
      if (t <= schedule.tau1) return 1.0;
      if (t >= schedule.tau2) return 0.0;
      return (schedule.tau2 - t) / (schedule.tau2 - schedule.tau1);
    case AnnealVariant::kPolynomial:
      if (t <= schedule.tau) return 1.0;
      return std::pow((1.0 - t) / (1.0 - schedule.tau), schedule.degree);
  }
  throw std::logic_error("unreachable anneal variant");
}

NoiseFamily noise_family_from_string(std::string_view name) {
  if (name == "gaussian") return NoiseFamily::kGaussian;
  if (name == "uniform") return NoiseFamily::kUniform;
  if (name == "laplace") return NoiseFamily::kLaplace;
  if (name == "gamma") return NoiseFamily::kGamma;
  throw std::invalid_argument("unknown noise family: " + std::string(name));
}

std::string to_string(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::kGaussian: return "gaussian";
    case NoiseFamily::kUniform: return "uniform";
    case NoiseFamily::kLaplace: return "laplace";
    case NoiseFamily::kGamma: return "gamma";
  }
  throw std::logic_error("unreachable noise family");
}

Eigen::VectorXd sample_unit_noise(NoiseFamily family, int dim, RngStream& rng) {
  if (dim < 1) {
    throw std::invalid_argument("sample_unit_noise needs dim >= 1");
  }
  Eigen::VectorXd n(dim);
  switch (family) {
    case NoiseFamily::kGaussian:
      for (int i = 0; i < dim; ++i) n[i] = rng.normal();
      break;
    case NoiseFamily::kUniform:
      // Var(U[0,1)) = 1/12.
      for (int i = 0; i < dim; ++i) {
        n[i] = (rng.uniform01() - 0.5) * std::sqrt(12.0);
      }
      break;
    case NoiseFamily::kLaplace:
      // Difference of two Exp(1) draws is Laplace(0,1) with variance 2.
      for (int i = 0; i < dim; ++i) {
        n[i] = (rng.exponential() - rng.exponential()) / std::sqrt(2.0);
      }
      break;
    case NoiseFamily::kGamma:
      // Gamma(shape=2, scale=1) as a sum of two exponentials; mean 2, var 2.
      for (int i = 0; i < dim; ++i) {
        n[i] = (rng.exponential() + rng.exponential() - 2.0) / std::sqrt(2.0);
      }
      break;
  }
  return n;
}

Eigen::VectorXd rescale_condition(const Eigen::VectorXd& y_hat, double mu_in,
                                  double sigma_in, double psi) {
  if (y_hat.size() < 2) {
    throw std::invalid_argument("rescale_condition needs dimension >= 2");
  }
  if (sigma_in < 0.0) {
    throw std::invalid_argument("rescale_condition needs sigma_in >= 0");
  }
  const auto n = static_cast<double>(y_hat.size());
  const double mean = y_hat.mean();
  const double var = (y_hat.array() - mean).square().sum() / n;  // population
  const double stddev = std::sqrt(var);

  Eigen::VectorXd rescaled;
  if (stddev < 1e-12) {
    rescaled = Eigen::VectorXd::Constant(y_hat.size(), mu_in);
  } else {
    rescaled = ((y_hat.array() - mean) / stddev * sigma_in + mu_in).matrix();
  }
  return psi * rescaled + (1.0 - psi) * y_hat;
}

Eigen::VectorXd corrupt_condition(const Eigen::VectorXd& y, double t,
                                  const CadsConfig& cfg, RngStream& rng) {
  if (y.size() == 0) {
    throw std::invalid_argument("corrupt_condition needs a non-empty condition");
  }
  if (cfg.rescale && y.size() < 2) {
    throw std::invalid_argument(
        "corrupt_condition: rescale needs dimension >= 2");
  }
  const double gamma = anneal_weight(cfg.anneal, t);
  const double noise_amp = cfg.noise_scale * std::sqrt(1.0 - gamma);

  if (noise_amp == 0.0) {
    if (gamma == 1.0) return y;
    // Rescaling a pure rescaling of y with psi = 1 restores y exactly; resolve
    // it algebraically so a zero-noise pass is bitwise transparent.
    if (cfg.rescale && cfg.mixing_factor == 1.0) return y;
    Eigen::VectorXd y_hat = std::sqrt(gamma) * y;
    if (cfg.rescale) {
      const double mu_in = y.mean();
      const double sigma_in = std::sqrt(
          (y.array() - mu_in).square().sum() / static_cast<double>(y.size()));
      return rescale_condition(y_hat, mu_in, sigma_in, cfg.mixing_factor);
    }
    return y_hat;
  }

  const Eigen::VectorXd n =
      sample_unit_noise(cfg.noise_distribution, static_cast<int>(y.size()), rng);
  Eigen::VectorXd y_hat = std::sqrt(gamma) * y + noise_amp * n;
  if (cfg.rescale) {
    const double mu_in = y.mean();
    const double sigma_in = std::sqrt(
        (y.array() - mu_in).square().sum() / static_cast<double>(y.size()));
    return rescale_condition(y_hat, mu_in, sigma_in, cfg.mixing_factor);
  }
  return y_hat;
}

double dynamic_cfg_weight(double w_cfg, double t, const AnnealSchedule& schedule) {
  if (w_cfg < 0.0) {
    throw std::invalid_argument("dynamic_cfg_weight needs w_cfg >= 0");
  }
  return anneal_weight(schedule, t) * w_cfg;
}

}  // namespace cads
