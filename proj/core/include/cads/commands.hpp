#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cads/config.hpp"

namespace cads {

// Command implementations behind the CLI. Validation problems throw
// std::invalid_argument (usage error, exit 1); anything failing mid-run
// throws std::runtime_error (exit 2). The CADS_OUTPUT_DIR environment
// variable overrides every output directory argument.

std::string resolve_output_dir(const std::string& requested);

struct TrainArgs {
  std::string config_path;
  std::string out_dir;  // empty: use the config's output.dir
};
// Writes checkpoint.bin and train_manifest.json (seed + loss curve).
void cmd_train(const TrainArgs& args);

struct SampleArgs {
  std::string checkpoint;     // model source; empty with use_oracle
  bool use_oracle = false;
  GmmGeometry gmm;            // oracle source, clip box, label count
  SamplerSettings sampler;
  CadsSettings cads;          // enabled flag included
  DynamicCfgSettings dynamic_cfg;
  bool unconditional = false; // all chains condition-free (label -1)
  std::string out_dir = "out";
};
// Writes samples.csv (label,chain,x0,x1) and sample_manifest.json.
void cmd_sample(const SampleArgs& args);

struct EvalArgs {
  std::string samples_path;
  std::string reference_path;  // empty: draw a reference set from the gmm
  GmmGeometry gmm;
  MetricSettings metrics;
  std::string out_dir = "out";
};
// Writes metrics.json, per_condition.csv and eval_manifest.json.
void cmd_eval(const EvalArgs& args);

struct AblateArgs {
  SampleArgs base;
  MetricSettings metrics;
  // Grid axes in flag order: key in {s, tau1, tau2, psi, d, noise-dist,
  // w_cfg, steps}, comma-separated values. Rows cover the cross product.
  std::vector<std::pair<std::string, std::string>> vary;
  std::string out_dir = "out";
};
// Writes ablation.csv (one row per grid point) and ablate_manifest.json.
void cmd_ablate(const AblateArgs& args);

struct PlotArgs {
  std::vector<std::string> sample_csvs;
  std::string out_path = "figure.svg";
  std::string title = "samples";
  double axis_extent = 4.5;
};
// Writes a standalone SVG with one panel per input file.
void cmd_plot(const PlotArgs& args);

}  // namespace cads
