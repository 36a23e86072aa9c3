#include "cads/commands.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "cads/csv.hpp"
#include "cads/manifest.hpp"
#include "cads/metrics.hpp"
#include "cads/svg_plot.hpp"

namespace cads {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<int> conditional_labels(int num_classes, int per_class) {
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(num_classes) * per_class);
  for (int k = 0; k < num_classes; ++k) {
    for (int c = 0; c < per_class; ++c) labels.push_back(k);
  }
  return labels;
}

SamplerConfig build_sampler_config(const SampleArgs& args, const GmmSpec& spec) {
  ExperimentConfig holder;
  holder.gmm = args.gmm;
  holder.sampler = args.sampler;
  holder.cads = args.cads;
  holder.dynamic_cfg = args.dynamic_cfg;
  holder.validate();
  return holder.sampler_config(spec);
}

std::string sample_args_summary(const SampleArgs& args) {
  std::ostringstream os;
  os << "sample " << (args.use_oracle ? "oracle" : args.checkpoint) << " "
     << args.sampler.kind << " steps=" << args.sampler.num_steps
     << " cfg=" << args.sampler.guidance_weight;
  if (args.cads.enabled) {
    os << " cads(s=" << args.cads.noise_scale << ",tau1=" << args.cads.tau1
       << ",tau2=" << args.cads.tau2 << ",psi=" << args.cads.psi << ")";
  }
  if (args.dynamic_cfg.enabled) os << " dynamic-cfg";
  os << " seed=" << args.sampler.seed;
  return os.str();
}

struct SampleRun {
  std::vector<ChainResult> results;
  GmmSpec spec;
};

SampleRun run_sampling(const SampleArgs& args) {
  if (args.use_oracle == !args.checkpoint.empty()) {
    throw std::invalid_argument("pick exactly one of --checkpoint and --oracle");
  }
  SampleRun run;
  run.spec = make_grid_gmm(args.gmm.side, args.gmm.spacing, args.gmm.std_dev);

  std::optional<Denoiser> model;
  ScoreSource source = OracleSource{&run.spec};
  if (!args.use_oracle) {
    model = load_checkpoint(args.checkpoint);
    if (model->num_classes != run.spec.num_components()) {
      throw std::invalid_argument(
          "checkpoint was trained for " + std::to_string(model->num_classes) +
          " classes but the gmm grid has " +
          std::to_string(run.spec.num_components()));
    }
    source = DenoiserSource{&*model};
  }

  const SamplerConfig cfg = build_sampler_config(args, run.spec);
  const DiffusionSchedule schedule = build_cosine_vp_schedule(cfg.num_steps);
  std::vector<int> labels =
      args.unconditional
          ? std::vector<int>(static_cast<std::size_t>(args.sampler.per_class) *
                                 run.spec.num_components(),
                             -1)
          : conditional_labels(run.spec.num_components(), args.sampler.per_class);
  run.results = sample_batch(source, labels, cfg, schedule);
  return run;
}

std::vector<LabeledSample> draw_reference(const GmmSpec& spec,
                                          const std::map<int, int>& counts,
                                          std::uint64_t eval_seed) {
  RngStream rng = RngStream::derive(eval_seed, 0, StreamPurpose::kEvalReference);
  std::vector<LabeledSample> reference;
  for (const auto& [label, count] : counts) {
    auto draws = gmm_sample(spec, label, count, rng);
    reference.insert(reference.end(), draws.begin(), draws.end());
  }
  return reference;
}

void check_label_sets(const std::set<int>& sample_labels,
                      const std::set<int>& reference_labels) {
  std::vector<int> missing_in_reference, missing_in_samples;
  for (int l : sample_labels) {
    if (!reference_labels.count(l)) missing_in_reference.push_back(l);
  }
  for (int l : reference_labels) {
    if (!sample_labels.count(l)) missing_in_samples.push_back(l);
  }
  if (missing_in_reference.empty() && missing_in_samples.empty()) return;
  std::ostringstream os;
  os << "label sets differ;";
  if (!missing_in_reference.empty()) {
    os << " missing from reference:";
    for (int l : missing_in_reference) os << " " << l;
  }
  if (!missing_in_samples.empty()) {
    os << " missing from samples:";
    for (int l : missing_in_samples) os << " " << l;
  }
  throw std::invalid_argument(os.str());
}

MetricsReport evaluate_run(const std::vector<ChainResult>& results,
                           const std::vector<LabeledSample>& reference,
                           const GmmSpec& spec, const MetricSettings& metrics) {
  std::optional<double> bandwidth;
  if (metrics.bandwidth > 0.0) bandwidth = metrics.bandwidth;
  return compute_report(results, reference, spec, metrics.knn_k, bandwidth);
}

}  // namespace

std::string resolve_output_dir(const std::string& requested) {
  if (const char* env = std::getenv("CADS_OUTPUT_DIR"); env && *env) {
    return env;
  }
  return requested;
}

void cmd_train(const TrainArgs& args) {
  const auto start = Clock::now();
  const ExperimentConfig config = load_config(args.config_path);
  config.validate();
  const std::string out_dir =
      resolve_output_dir(args.out_dir.empty() ? config.output_dir : args.out_dir);
  DirectoryLock lock(out_dir);
  const std::filesystem::path out(out_dir);

  const GmmSpec spec = config.make_gmm();
  const DiffusionSchedule schedule =
      build_cosine_vp_schedule(config.sampler.num_steps);
  TrainResult result = train(spec, config.train, schedule);
  save_checkpoint(out / "checkpoint.bin", result.model);

  RunManifest manifest;
  manifest.command = "train " + args.config_path;
  manifest.config_text = serialize_config(config);
  manifest.inputs.push_back({"checkpoint.bin", fnv1a64_hex(out / "checkpoint.bin")});
  manifest.checkpoint_path = "checkpoint.bin";
  manifest.seed = config.train.seed;
  manifest.loss_curve = result.epoch_loss;
  manifest.wall_seconds = seconds_since(start);
  write_manifest(out / "train_manifest.json", manifest);
}

void cmd_sample(const SampleArgs& args) {
  const auto start = Clock::now();
  SampleRun run = run_sampling(args);

  const std::string out_dir = resolve_output_dir(args.out_dir);
  DirectoryLock lock(out_dir);
  const std::filesystem::path out(out_dir);
  write_samples_csv(out / "samples.csv", run.results);

  ExperimentConfig snapshot;
  snapshot.gmm = args.gmm;
  snapshot.sampler = args.sampler;
  snapshot.cads = args.cads;
  snapshot.dynamic_cfg = args.dynamic_cfg;
  snapshot.output_dir = out_dir;

  RunManifest manifest;
  manifest.command = sample_args_summary(args);
  manifest.config_text = serialize_config(snapshot);
  if (!args.checkpoint.empty()) {
    manifest.inputs.push_back(
        {std::filesystem::relative(args.checkpoint, out).string(),
         fnv1a64_hex(args.checkpoint)});
  }
  manifest.inputs.push_back({"samples.csv", fnv1a64_hex(out / "samples.csv")});
  manifest.samples_path = "samples.csv";
  manifest.seed = args.sampler.seed;
  manifest.wall_seconds = seconds_since(start);
  write_manifest(out / "sample_manifest.json", manifest);
}

void cmd_eval(const EvalArgs& args) {
  const auto start = Clock::now();
  const std::vector<ChainResult> results = read_samples_csv(args.samples_path);
  if (results.empty()) {
    throw std::runtime_error("samples file has no rows: " + args.samples_path);
  }
  const GmmSpec spec = make_grid_gmm(args.gmm.side, args.gmm.spacing, args.gmm.std_dev);

  std::set<int> sample_labels;
  std::map<int, int> counts;
  for (const auto& r : results) {
    if (r.label < 0 || r.label >= spec.num_components()) {
      throw std::invalid_argument("samples contain label " + std::to_string(r.label) +
                                  " outside the gmm's 0.." +
                                  std::to_string(spec.num_components() - 1));
    }
    sample_labels.insert(r.label);
    ++counts[r.label];
  }

  std::vector<LabeledSample> reference;
  if (args.reference_path.empty()) {
    reference = draw_reference(spec, counts, args.metrics.eval_seed);
  } else {
    reference = read_dataset_csv(args.reference_path);
    std::set<int> reference_labels;
    for (const auto& s : reference) reference_labels.insert(s.label);
    check_label_sets(sample_labels, reference_labels);
  }

  const MetricsReport report = evaluate_run(results, reference, spec, args.metrics);

  const std::string out_dir = resolve_output_dir(args.out_dir);
  DirectoryLock lock(out_dir);
  const std::filesystem::path out(out_dir);
  write_report_json((out / "metrics.json").string(), report);
  write_per_condition_csv((out / "per_condition.csv").string(), report);

  RunManifest manifest;
  manifest.command = "eval " + args.samples_path;
  manifest.config_text =
      args.reference_path.empty() ? "reference: gmm draw" : "reference: " + args.reference_path;
  manifest.inputs.push_back({"metrics.json", fnv1a64_hex(out / "metrics.json")});
  manifest.inputs.push_back(
      {"per_condition.csv", fnv1a64_hex(out / "per_condition.csv")});
  manifest.metrics_path = "metrics.json";
  manifest.seed = args.metrics.eval_seed;
  manifest.wall_seconds = seconds_since(start);
  write_manifest(out / "eval_manifest.json", manifest);
}

namespace {

void apply_vary(SampleArgs& args, const std::string& key, const std::string& value) {
  auto as_double = [&](const std::string& raw) {
    try {
      std::size_t used = 0;
      const double v = std::stod(raw, &used);
      if (used != raw.size()) throw std::invalid_argument(raw);
      return v;
    } catch (const std::exception&) {
      throw std::invalid_argument("ablate: bad numeric value '" + raw +
                                  "' for axis " + key);
    }
  };
  if (key == "s") {
    args.cads.enabled = true;
    args.cads.noise_scale = as_double(value);
  } else if (key == "tau1") {
    args.cads.enabled = true;
    args.cads.tau1 = as_double(value);
  } else if (key == "tau2") {
    args.cads.enabled = true;
    args.cads.tau2 = as_double(value);
  } else if (key == "psi") {
    args.cads.enabled = true;
    args.cads.psi = as_double(value);
  } else if (key == "d") {
    args.cads.enabled = true;
    args.cads.schedule = "polynomial";
    args.cads.degree = static_cast<int>(as_double(value));
  } else if (key == "noise-dist") {
    args.cads.enabled = true;
    args.cads.noise_distribution = value;
  } else if (key == "w_cfg") {
    args.sampler.guidance_weight = as_double(value);
  } else if (key == "steps") {
    args.sampler.num_steps = static_cast<int>(as_double(value));
  } else {
    throw std::invalid_argument("ablate: unknown grid axis '" + key + "'");
  }
}

std::vector<std::string> split_csv_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(text.substr(start));
      break;
    }
    out.push_back(text.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

}  // namespace

void cmd_ablate(const AblateArgs& args) {
  const auto start = Clock::now();
  if (args.vary.empty()) {
    throw std::invalid_argument("ablate: empty grid (no --vary axes)");
  }
  std::vector<std::string> axis_names;
  std::vector<std::vector<std::string>> axis_values;
  for (const auto& [key, list] : args.vary) {
    const auto values = split_csv_list(list);
    if (values.empty() || (values.size() == 1 && values[0].empty())) {
      throw std::invalid_argument("ablate: axis '" + key + "' has no values");
    }
    axis_names.push_back(key);
    axis_values.push_back(values);
  }

  // Shared reference set, drawn once; the sampler seed is fixed across points.
  const GmmSpec spec =
      make_grid_gmm(args.base.gmm.side, args.base.gmm.spacing, args.base.gmm.std_dev);
  std::map<int, int> counts;
  for (int k = 0; k < spec.num_components(); ++k) {
    counts[k] = args.base.sampler.per_class;
  }
  const std::vector<LabeledSample> reference =
      draw_reference(spec, counts, args.metrics.eval_seed);

  const std::string out_dir = resolve_output_dir(args.out_dir);
  DirectoryLock lock(out_dir);
  const std::filesystem::path out(out_dir);
  std::ofstream table(out / "ablation.csv", std::ios::binary);
  if (!table) throw std::runtime_error("cannot write ablation.csv");
  for (const auto& name : axis_names) table << name << ",";
  table << "recall,precision,vendi_mean,mss_mean,fd2d,alignment_accuracy,"
           "support_coverage_rate\n";

  std::vector<std::size_t> index(axis_names.size(), 0);
  char buf[256];
  while (true) {
    SampleArgs point = args.base;
    for (std::size_t a = 0; a < axis_names.size(); ++a) {
      apply_vary(point, axis_names[a], axis_values[a][index[a]]);
    }
    SampleRun run = run_sampling(point);
    const MetricsReport report =
        evaluate_run(run.results, reference, run.spec, args.metrics);
    for (std::size_t a = 0; a < axis_names.size(); ++a) {
      table << axis_values[a][index[a]] << ",";
    }
    std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n",
                  report.recall, report.precision, report.vendi_mean,
                  report.mss_mean, report.fd2d, report.alignment_accuracy,
                  report.support_coverage_rate);
    table << buf;

    // Advance the mixed-radix counter (last axis fastest).
    std::size_t a = axis_names.size();
    while (a > 0) {
      --a;
      if (++index[a] < axis_values[a].size()) break;
      index[a] = 0;
      if (a == 0) goto done;
    }
  }
done:
  table.close();

  RunManifest manifest;
  manifest.command = "ablate " + sample_args_summary(args.base);
  std::ostringstream grid;
  for (const auto& [key, list] : args.vary) grid << key << "=" << list << " ";
  manifest.config_text = "grid: " + grid.str();
  manifest.inputs.push_back({"ablation.csv", fnv1a64_hex(out / "ablation.csv")});
  manifest.metrics_path = "ablation.csv";
  manifest.seed = args.base.sampler.seed;
  manifest.wall_seconds = seconds_since(start);
  write_manifest(out / "ablate_manifest.json", manifest);
}

void cmd_plot(const PlotArgs& args) {
  if (args.sample_csvs.empty()) {
    throw std::invalid_argument("plot: at least one samples csv is required");
  }
  std::vector<ScatterPanel> panels;
  for (const auto& csv_path : args.sample_csvs) {
    ScatterPanel panel;
    panel.points = read_samples_csv(csv_path);
    // Panel title from the run manifest when one sits next to the csv.
    const auto manifest_path =
        std::filesystem::path(csv_path).parent_path() / "sample_manifest.json";
    if (std::filesystem::exists(manifest_path)) {
      panel.title = read_manifest(manifest_path).command;
    } else {
      panel.title = std::filesystem::path(csv_path).stem().string();
    }
    panels.push_back(std::move(panel));
  }
  write_scatter_svg(args.out_path, panels, args.axis_extent, args.title);
}

}  // namespace cads
