#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cads/sampler.hpp"
#include "cads/training.hpp"

namespace cads {

// Experiment configuration, stored as INI-style text:
//   - sections in brackets, one "key = value" per line
//   - '#' or ';' starts a comment; blank lines ignored
//   - unknown sections or keys are rejected by name
// parse_config(serialize_config(c)) reproduces c exactly.

struct GmmGeometry {
  int side = 5;
  double spacing = 2.0;
  double std_dev = 0.1;

  bool operator==(const GmmGeometry&) const = default;
};

struct SamplerSettings {
  std::string kind = "ddpm";
  int num_steps = 100;
  double guidance_weight = 5.0;
  double ddim_eta = 0.0;
  std::uint64_t seed = 7;
  int per_class = 100;
  int threads = 0;  // 0 = hardware concurrency

  bool operator==(const SamplerSettings&) const = default;
};

struct CadsSettings {
  bool enabled = false;
  double noise_scale = 0.15;
  double tau1 = 0.5;
  double tau2 = 0.9;
  double psi = 1.0;
  bool rescale = true;
  std::string noise_distribution = "gaussian";
  std::string schedule = "linear";  // or "polynomial"
  double tau = 0.5;                 // polynomial knee
  int degree = 2;                   // polynomial degree

  bool operator==(const CadsSettings&) const = default;
};

struct DynamicCfgSettings {
  bool enabled = false;
  double tau1 = 0.5;
  double tau2 = 0.9;

  bool operator==(const DynamicCfgSettings&) const = default;
};

struct MetricSettings {
  int knn_k = 3;
  double bandwidth = 0.0;  // 0 = median heuristic
  std::uint64_t eval_seed = 99;

  bool operator==(const MetricSettings&) const = default;
};

struct ExperimentConfig {
  GmmGeometry gmm;
  TrainConfig train;
  SamplerSettings sampler;
  CadsSettings cads;
  DynamicCfgSettings dynamic_cfg;
  MetricSettings metrics;
  std::string output_dir = "out";

  bool operator==(const ExperimentConfig&) const = default;

  // Cross-field checks; throws naming the offending keys.
  void validate() const;

  GmmSpec make_gmm() const;
  AnnealSchedule cads_anneal() const;
  CadsConfig cads_config() const;
  // Sampler config assembled from the settings plus the data-derived clip box.
  SamplerConfig sampler_config(const GmmSpec& spec) const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& config);

}  // namespace cads
