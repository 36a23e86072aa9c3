#include "cads/sampler.hpp"

#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace cads {

namespace {

constexpr int kChainBlock = 256;  // lockstep block size, fixed for determinism

struct PosteriorCoeffs {
  double mean_z;    // coefficient on z_t
  double mean_x;    // coefficient on x_hat
  double stddev;    // posterior standard deviation
  double alpha_prev;
  double sigma_prev;
};

PosteriorCoeffs posterior_coeffs(const DiffusionSchedule& s, int i) {
  const double a = s.alphas[i] / s.alphas[i - 1];
  const double sig2 = s.sigmas[i] * s.sigmas[i];
  const double sig2_prev = s.sigmas[i - 1] * s.sigmas[i - 1];
  const double beta2 = sig2 - a * a * sig2_prev;
  PosteriorCoeffs c;
  c.mean_z = a * sig2_prev / sig2;
  c.mean_x = s.alphas[i - 1] * beta2 / sig2;
  c.stddev = std::sqrt(beta2 * sig2_prev / sig2);
  c.alpha_prev = s.alphas[i - 1];
  c.sigma_prev = s.sigmas[i - 1];
  return c;
}

Eigen::Vector2d clip_to_box(const Eigen::Vector2d& x, double bound) {
  return x.cwiseMax(-bound).cwiseMin(bound);
}

void check_step(const DiffusionSchedule& schedule, int step) {
  if (step < 1 || step > schedule.num_steps) {
    throw std::invalid_argument("sampler step index out of range");
  }
}

int snap_to_nearest_row(const Eigen::MatrixXd& table, const Eigen::VectorXd& y) {
  int best = 0;
  double best_d2 = (y - table.row(0).transpose()).squaredNorm();
  for (Eigen::Index k = 1; k < table.rows(); ++k) {
    const double d2 = (y - table.row(k).transpose()).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<int>(k);
    }
  }
  return best;
}

Eigen::Vector2d combine_guided(const Eigen::Vector2d& cond,
                               const Eigen::Vector2d& uncond, double weight) {
  if (weight == 1.0) return cond;
  if (weight == 0.0) return uncond;
  return uncond + weight * (cond - uncond);
}

}  // namespace

SamplerKind sampler_kind_from_string(std::string_view name) {
  if (name == "ddpm") return SamplerKind::kDdpm;
  if (name == "ddim") return SamplerKind::kDdim;
  throw std::invalid_argument("unknown sampler kind: " + std::string(name));
}

std::string to_string(SamplerKind kind) {
  return kind == SamplerKind::kDdpm ? "ddpm" : "ddim";
}

void SamplerConfig::validate() const {
  if (num_steps < 2) throw std::invalid_argument("sampler.num_steps must be >= 2");
  if (guidance_weight < 0.0) {
    throw std::invalid_argument("sampler.guidance_weight must be >= 0");
  }
  if (!(ddim_eta >= 0.0 && ddim_eta <= 1.0)) {
    throw std::invalid_argument("sampler.ddim_eta must be in [0,1]");
  }
  if (clip_bound <= 0.0) throw std::invalid_argument("sampler.clip_bound must be > 0");
  if (threads < 0) throw std::invalid_argument("sampler.threads must be >= 0");
  if (cads) {
    if (cads->noise_scale < 0.0) {
      throw std::invalid_argument("cads.noise_scale must be >= 0");
    }
    if (!(cads->mixing_factor >= 0.0 && cads->mixing_factor <= 1.0)) {
      throw std::invalid_argument("cads.mixing_factor must be in [0,1]");
    }
  }
}

int source_num_classes(const ScoreSource& source) {
  if (const auto* d = std::get_if<DenoiserSource>(&source)) {
    return d->model->num_classes;
  }
  return std::get<OracleSource>(source).spec->num_components();
}

Eigen::MatrixXd oracle_label_embeddings(int num_components) {
  Eigen::MatrixXd table(num_components, kClassEmbedDim);
  for (int k = 0; k < num_components; ++k) {
    Eigen::VectorXd row = time_embedding((k + 0.5) / num_components);
    // Standardized rows give every label the same scalar statistics, so the
    // rescale step cannot leak label information once annealing hits zero.
    const double mean = row.mean();
    const double sd =
        std::sqrt((row.array() - mean).square().sum() / row.size());
    table.row(k) = ((row.array() - mean) / sd).transpose();
  }
  return table;
}

ChainStreams make_chain_streams(std::uint64_t master_seed, int chain) {
  return ChainStreams{
      RngStream::derive(master_seed, chain, StreamPurpose::kChainInit),
      RngStream::derive(master_seed, chain, StreamPurpose::kAncestral),
      RngStream::derive(master_seed, chain, StreamPurpose::kConditionNoise),
  };
}

Eigen::Vector2d guided_prediction(const ScoreSource& source,
                                  const Eigen::Vector2d& z, int step,
                                  int label, const SamplerConfig& cfg,
                                  const DiffusionSchedule& schedule,
                                  RngStream& condition_stream) {
  check_step(schedule, step);
  const double t = schedule.time_at(step);
  const double alpha = schedule.alphas[step];
  const double sigma = schedule.sigmas[step];
  const int num_classes = source_num_classes(source);
  if (label >= num_classes) throw std::out_of_range("guided_prediction: unknown label");

  const double weight =
      cfg.dynamic_cfg ? dynamic_cfg_weight(cfg.guidance_weight, t, *cfg.dynamic_cfg)
                      : cfg.guidance_weight;

  if (const auto* ds = std::get_if<DenoiserSource>(&source)) {
    const Denoiser& model = *ds->model;
    const Eigen::VectorXd uncond_pred = model.forward(z, t, model.null_embedding());
    const Eigen::Vector2d eps_u =
        prediction_to_eps_and_x(uncond_pred, z, alpha, sigma, model.target_type).eps;
    if (label < 0) return eps_u;

    Eigen::VectorXd cond_embedding = model.class_embedding(label);
    if (cfg.cads) {
      cond_embedding =
          corrupt_condition(cond_embedding, t, *cfg.cads, condition_stream);
    }
    const Eigen::VectorXd cond_pred = model.forward(z, t, cond_embedding);
    const Eigen::Vector2d eps_c =
        prediction_to_eps_and_x(cond_pred, z, alpha, sigma, model.target_type).eps;
    return combine_guided(eps_c, eps_u, weight);
  }

  const GmmSpec& spec = *std::get<OracleSource>(source).spec;
  const Eigen::Vector2d score_u = analytic_score(spec, z, alpha, sigma);
  if (label < 0) return -sigma * score_u;

  int effective_label = label;
  if (cfg.cads) {
    const Eigen::MatrixXd table = oracle_label_embeddings(spec.num_components());
    const Eigen::VectorXd corrupted = corrupt_condition(
        table.row(label).transpose(), t, *cfg.cads, condition_stream);
    effective_label = snap_to_nearest_row(table, corrupted);
  }
  const Eigen::Vector2d score_c =
      analytic_score(spec, z, alpha, sigma, effective_label);
  return -sigma * combine_guided(score_c, score_u, weight);
}

Eigen::Vector2d ddpm_step(const Eigen::Vector2d& z,
                          const Eigen::Vector2d& eps_hat, int step,
                          const DiffusionSchedule& schedule, double clip_bound,
                          RngStream& ancestral) {
  check_step(schedule, step);
  if (!z.allFinite() || !eps_hat.allFinite()) {
    throw std::runtime_error("ddpm_step: non-finite state");
  }
  const double alpha = schedule.alphas[step];
  const double sigma = schedule.sigmas[step];
  const Eigen::Vector2d x_hat = clip_to_box((z - sigma * eps_hat) / alpha, clip_bound);
  if (step == 1) return x_hat;

  const PosteriorCoeffs c = posterior_coeffs(schedule, step);
  Eigen::Vector2d noise;
  noise[0] = ancestral.normal();
  noise[1] = ancestral.normal();
  return c.mean_z * z + c.mean_x * x_hat + c.stddev * noise;
}

Eigen::Vector2d ddim_step(const Eigen::Vector2d& z,
                          const Eigen::Vector2d& eps_hat, int step,
                          const DiffusionSchedule& schedule, double eta,
                          double clip_bound, RngStream& ancestral) {
  check_step(schedule, step);
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("ddim_step: eta must be in [0,1]");
  }
  if (!z.allFinite() || !eps_hat.allFinite()) {
    throw std::runtime_error("ddim_step: non-finite state");
  }
  const double alpha = schedule.alphas[step];
  const double sigma = schedule.sigmas[step];
  const Eigen::Vector2d x_hat = clip_to_box((z - sigma * eps_hat) / alpha, clip_bound);
  if (step == 1) return x_hat;

  const PosteriorCoeffs c = posterior_coeffs(schedule, step);
  const double churn = eta * c.stddev;
  const double residual =
      std::sqrt(std::max(c.sigma_prev * c.sigma_prev - churn * churn, 0.0));
  Eigen::Vector2d out = c.alpha_prev * x_hat + residual * eps_hat;
  if (eta > 0.0) {
    Eigen::Vector2d noise;
    noise[0] = ancestral.normal();
    noise[1] = ancestral.normal();
    out += churn * noise;
  }
  return out;
}

namespace {

// Lockstep sampler for one block of chains. For a denoiser source the
// conditional and unconditional predictions of the whole block are evaluated
// as two batched forwards per step.
void run_block(const ScoreSource& source, const std::vector<int>& labels,
               const SamplerConfig& cfg, const DiffusionSchedule& schedule,
               int begin, int end, std::vector<ChainResult>& results) {
  const int b = end - begin;
  std::vector<ChainStreams> streams;
  streams.reserve(b);
  Eigen::MatrixXd z(2, b);
  for (int j = 0; j < b; ++j) {
    streams.push_back(make_chain_streams(cfg.seed, begin + j));
    z(0, j) = streams[j].init.normal();
    z(1, j) = streams[j].init.normal();
    auto& r = results[begin + j];
    r.label = labels[begin + j];
    r.chain = begin + j;
    r.seed = cfg.seed;
    if (cfg.record_trajectory) r.trajectory.push_back(z.col(j));
  }

  const auto* denoiser_source = std::get_if<DenoiserSource>(&source);
  Eigen::MatrixXd cond(kClassEmbedDim, b);
  Eigen::MatrixXd nulls(kClassEmbedDim, b);
  Eigen::MatrixXd oracle_table;
  if (denoiser_source) {
    nulls = denoiser_source->model->null_embedding().replicate(1, b);
  } else if (cfg.cads) {
    oracle_table = oracle_label_embeddings(
        std::get<OracleSource>(source).spec->num_components());
  }

  for (int i = schedule.num_steps; i >= 1; --i) {
    const double t = schedule.time_at(i);
    const double alpha = schedule.alphas[i];
    const double sigma = schedule.sigmas[i];
    const double weight = cfg.dynamic_cfg
                              ? dynamic_cfg_weight(cfg.guidance_weight, t,
                                                   *cfg.dynamic_cfg)
                              : cfg.guidance_weight;

    Eigen::MatrixXd eps_hat(2, b);
    if (denoiser_source) {
      const Denoiser& model = *denoiser_source->model;
      for (int j = 0; j < b; ++j) {
        const int label = labels[begin + j];
        Eigen::VectorXd embedding = model.class_embedding(label);
        if (label >= 0 && cfg.cads) {
          embedding = corrupt_condition(embedding, t, *cfg.cads,
                                        streams[j].condition);
        }
        cond.col(j) = embedding;
      }
      const Eigen::MatrixXd pred_c = model.forward_batch(z, t, cond);
      const Eigen::MatrixXd pred_u = model.forward_batch(z, t, nulls);
      for (int j = 0; j < b; ++j) {
        const Eigen::Vector2d eps_c =
            prediction_to_eps_and_x(pred_c.col(j), z.col(j), alpha, sigma,
                                    model.target_type)
                .eps;
        const Eigen::Vector2d eps_u =
            prediction_to_eps_and_x(pred_u.col(j), z.col(j), alpha, sigma,
                                    model.target_type)
                .eps;
        eps_hat.col(j) = labels[begin + j] < 0
                             ? eps_u
                             : combine_guided(eps_c, eps_u, weight);
      }
    } else {
      const GmmSpec& spec = *std::get<OracleSource>(source).spec;
      for (int j = 0; j < b; ++j) {
        const int label = labels[begin + j];
        const Eigen::Vector2d score_u = analytic_score(spec, z.col(j), alpha, sigma);
        if (label < 0) {
          eps_hat.col(j) = -sigma * score_u;
          continue;
        }
        int effective_label = label;
        if (cfg.cads) {
          const Eigen::VectorXd corrupted =
              corrupt_condition(oracle_table.row(label).transpose(), t,
                                *cfg.cads, streams[j].condition);
          effective_label = snap_to_nearest_row(oracle_table, corrupted);
        }
        const Eigen::Vector2d score_c =
            analytic_score(spec, z.col(j), alpha, sigma, effective_label);
        eps_hat.col(j) = -sigma * combine_guided(score_c, score_u, weight);
      }
    }

    for (int j = 0; j < b; ++j) {
      Eigen::Vector2d next;
      if (cfg.kind == SamplerKind::kDdpm) {
        next = ddpm_step(z.col(j), eps_hat.col(j), i, schedule, cfg.clip_bound,
                         streams[j].ancestral);
      } else {
        next = ddim_step(z.col(j), eps_hat.col(j), i, schedule, cfg.ddim_eta,
                         cfg.clip_bound, streams[j].ancestral);
      }
      z.col(j) = next;
      if (cfg.record_trajectory) results[begin + j].trajectory.push_back(next);
    }
  }

  for (int j = 0; j < b; ++j) results[begin + j].point = z.col(j);
}

}  // namespace

std::vector<ChainResult> sample_batch(const ScoreSource& source,
                                      const std::vector<int>& labels,
                                      const SamplerConfig& cfg,
                                      const DiffusionSchedule& schedule) {
  cfg.validate();
  if (labels.empty()) throw std::invalid_argument("sample_batch: no labels");
  if (schedule.num_steps != cfg.num_steps) {
    throw std::invalid_argument("sample_batch: schedule/config step mismatch");
  }
  const int num_classes = source_num_classes(source);
  for (int label : labels) {
    if (label < -1 || label >= num_classes) {
      throw std::out_of_range("sample_batch: label out of range");
    }
  }

  const int n = static_cast<int>(labels.size());
  std::vector<ChainResult> results(n);
  const int num_blocks = (n + kChainBlock - 1) / kChainBlock;
  unsigned num_threads = cfg.threads > 0
                             ? static_cast<unsigned>(cfg.threads)
                             : std::max(1u, std::thread::hardware_concurrency());
  num_threads = std::min<unsigned>(num_threads, num_blocks);

  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&](unsigned worker_id) {
    try {
      for (int blk = static_cast<int>(worker_id); blk < num_blocks;
           blk += static_cast<int>(num_threads)) {
        const int begin = blk * kChainBlock;
        const int end = std::min(begin + kChainBlock, n);
        run_block(source, labels, cfg, schedule, begin, end, results);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  if (num_threads <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(num_threads);
    for (unsigned w = 0; w < num_threads; ++w) pool.emplace_back(worker, w);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (const auto& r : results) {
    if (!r.point.allFinite()) {
      throw std::runtime_error("sample_batch: chain " + std::to_string(r.chain) +
                               " produced a non-finite sample");
    }
  }
  return results;
}

}  // namespace cads
