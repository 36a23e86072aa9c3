#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "cads/denoiser.hpp"
#include "cads/gmm.hpp"
#include "cads/schedule.hpp"

namespace cads {

enum class SamplerKind { kDdpm, kDdim };

SamplerKind sampler_kind_from_string(std::string_view name);
std::string to_string(SamplerKind kind);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::kDdpm;
  int num_steps = 100;
  double guidance_weight = 1.0;          // w_cfg; 1 = non-guided
  double ddim_eta = 0.0;                 // ignored by ddpm
  std::optional<CadsConfig> cads;        // condition corruption hook
  std::optional<AnnealSchedule> dynamic_cfg;  // guidance-weight hook
  std::uint64_t seed = 7;
  double clip_bound = 4.5;               // |x_hat| box half-width
  int threads = 1;                       // 0 = hardware concurrency
  bool record_trajectory = false;

  void validate() const;
};

struct ChainResult {
  Eigen::Vector2d point = Eigen::Vector2d::Zero();
  int label = -1;  // conditioned component; -1 = unconditional chain
  int chain = 0;
  std::uint64_t seed = 0;  // master seed of the run
  std::vector<Eigen::Vector2d> trajectory;  // filled if requested
};

// Score source: a trained denoiser or the exact mixture oracle.
struct DenoiserSource {
  const Denoiser* model = nullptr;
};
struct OracleSource {
  const GmmSpec* spec = nullptr;
};
using ScoreSource = std::variant<DenoiserSource, OracleSource>;

int source_num_classes(const ScoreSource& source);

// Canonical per-label condition vectors for the oracle: sinusoidal features
// of the label index, one row per component. Condition corruption acts on
// these exactly as it does on learned class embeddings; a corrupted vector
// selects the component with the nearest row.
Eigen::MatrixXd oracle_label_embeddings(int num_components);

// Per-chain sub-streams. Condition corruption draws from its own stream so
// toggling CADS never shifts the init or ancestral sequences.
struct ChainStreams {
  RngStream init;
  RngStream ancestral;
  RngStream condition;
};
ChainStreams make_chain_streams(std::uint64_t master_seed, int chain);

// Classifier-free-guided noise prediction at grid step i (t = i/N), with the
// dynamic-guidance and condition-corruption hooks applied in that order.
// For the oracle the combination happens in score space and is converted via
// eps = -sigma * score; a corrupted oracle condition selects the component
// with the nearest mean.
Eigen::Vector2d guided_prediction(const ScoreSource& source,
                                  const Eigen::Vector2d& z, int step,
                                  int label, const SamplerConfig& cfg,
                                  const DiffusionSchedule& schedule,
                                  RngStream& condition_stream);

// Ancestral VP step from grid index i to i-1. x_hat is clipped to the data
// box before the posterior; the final step returns x_hat with no noise.
Eigen::Vector2d ddpm_step(const Eigen::Vector2d& z,
                          const Eigen::Vector2d& eps_hat, int step,
                          const DiffusionSchedule& schedule, double clip_bound,
                          RngStream& ancestral);

// DDIM step; sigma_step = eta * ddpm posterior std. eta = 0 draws nothing.
Eigen::Vector2d ddim_step(const Eigen::Vector2d& z,
                          const Eigen::Vector2d& eps_hat, int step,
                          const DiffusionSchedule& schedule, double eta,
                          double clip_bound, RngStream& ancestral);

// One chain per label entry (-1 for unconditional). Chains are evaluated in
// fixed-size blocks stepped in lockstep (batched network evaluation); blocks
// are distributed over threads. Results depend only on (seed, chain index,
// config), never on the thread count.
std::vector<ChainResult> sample_batch(const ScoreSource& source,
                                      const std::vector<int>& labels,
                                      const SamplerConfig& cfg,
                                      const DiffusionSchedule& schedule);

}  // namespace cads
