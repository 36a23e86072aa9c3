// Command-line front end: train / sample / eval / ablate / plot.
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <iostream>
#include <stdexcept>

#include <CLI11.hpp>

#include "cads/commands.hpp"

namespace {

void add_gmm_flags(CLI::App* cmd, cads::GmmGeometry& gmm) {
  cmd->add_option("--gmm-side", gmm.side, "Grid side length (side^2 components)");
  cmd->add_option("--gmm-spacing", gmm.spacing, "Grid spacing between component means");
  cmd->add_option("--gmm-std", gmm.std_dev, "Per-component standard deviation");
}

void add_sampling_flags(CLI::App* cmd, cads::SampleArgs& args, bool& eta_given) {
  cmd->add_option("--checkpoint", args.checkpoint, "Trained model checkpoint");
  cmd->add_flag("--oracle", args.use_oracle, "Sample with the exact mixture score");
  add_gmm_flags(cmd, args.gmm);
  cmd->add_option("--sampler", args.sampler.kind, "ddpm or ddim")
      ->check(CLI::IsMember({"ddpm", "ddim"}));
  cmd->add_option("--steps", args.sampler.num_steps, "Number of sampling steps");
  cmd->add_option("--cfg", args.sampler.guidance_weight, "Guidance weight w_cfg");
  auto* eta = cmd->add_option("--eta", args.sampler.ddim_eta, "DDIM churn in [0,1]");
  eta->each([&eta_given](const std::string&) { eta_given = true; });
  cmd->add_flag("--cads", args.cads.enabled, "Enable condition annealing");
  cmd->add_option("--s", args.cads.noise_scale, "Condition noise scale");
  cmd->add_option("--tau1", args.cads.tau1, "Annealing ramp start");
  cmd->add_option("--tau2", args.cads.tau2, "Annealing ramp end");
  cmd->add_option("--psi", args.cads.psi, "Rescale mixing factor");
  cmd->add_flag("--no-rescale", [&args](std::int64_t) { args.cads.rescale = false; },
                "Disable condition rescaling");
  cmd->add_option("--noise-dist", args.cads.noise_distribution,
                  "gaussian, uniform, laplace or gamma")
      ->check(CLI::IsMember({"gaussian", "uniform", "laplace", "gamma"}));
  cmd->add_option("--anneal", args.cads.schedule, "linear or polynomial")
      ->check(CLI::IsMember({"linear", "polynomial"}));
  cmd->add_option("--tau", args.cads.tau, "Polynomial annealing knee");
  cmd->add_option("--degree", args.cads.degree, "Polynomial annealing degree");
  cmd->add_flag("--dynamic-cfg", args.dynamic_cfg.enabled,
                "Modulate the guidance weight by the annealing schedule");
  cmd->add_option("--dc-tau1", args.dynamic_cfg.tau1, "Dynamic CFG ramp start");
  cmd->add_option("--dc-tau2", args.dynamic_cfg.tau2, "Dynamic CFG ramp end");
  cmd->add_option("--seed", args.sampler.seed, "Master sampling seed");
  cmd->add_option("--per-class", args.sampler.per_class, "Chains per component");
  cmd->add_option("--threads", args.sampler.threads, "Worker threads (0 = auto)");
  cmd->add_flag("--unconditional", args.unconditional,
                "Ignore labels and sample the full mixture");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Condition-annealed diffusion sampling laboratory"};
  app.require_subcommand(1);

  // train
  cads::TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train the toy denoiser from a config file");
  train->add_option("--config", train_args.config_path, "INI config path")->required();
  train->add_option("--out", train_args.out_dir, "Output directory override");

  // sample
  cads::SampleArgs sample_args;
  bool sample_eta_given = false;
  auto* sample = app.add_subcommand("sample", "Draw samples from a checkpoint or the oracle");
  add_sampling_flags(sample, sample_args, sample_eta_given);
  sample->add_option("--out", sample_args.out_dir, "Output directory");

  // eval
  cads::EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Compute the metric suite for a samples csv");
  eval->add_option("--samples", eval_args.samples_path, "Samples csv")->required();
  eval->add_option("--reference", eval_args.reference_path,
                   "Reference csv (label,x0,x1); omitted: drawn from the gmm");
  add_gmm_flags(eval, eval_args.gmm);
  eval->add_option("--k", eval_args.metrics.knn_k, "k for precision/recall");
  eval->add_option("--bandwidth", eval_args.metrics.bandwidth,
                   "Similarity kernel bandwidth (0 = median heuristic)");
  eval->add_option("--eval-seed", eval_args.metrics.eval_seed,
                   "Seed for the drawn reference set");
  eval->add_option("--out", eval_args.out_dir, "Output directory");

  // ablate
  cads::AblateArgs ablate_args;
  bool ablate_eta_given = false;
  std::vector<std::string> vary_specs;
  auto* ablate = app.add_subcommand("ablate", "Metric table over a parameter grid");
  add_sampling_flags(ablate, ablate_args.base, ablate_eta_given);
  ablate->add_option("--vary", vary_specs,
                     "Grid axis key=v1,v2,... (repeatable; keys: s, tau1, tau2, "
                     "psi, d, noise-dist, w_cfg, steps)");
  ablate->add_option("--k", ablate_args.metrics.knn_k, "k for precision/recall");
  ablate->add_option("--eval-seed", ablate_args.metrics.eval_seed,
                     "Seed for the shared reference set");
  ablate->add_option("--out", ablate_args.out_dir, "Output directory");

  // plot
  cads::PlotArgs plot_args;
  auto* plot = app.add_subcommand("plot", "Scatter panels for one or more samples csvs");
  plot->add_option("files", plot_args.sample_csvs, "Samples csv files")->required();
  plot->add_option("--out", plot_args.out_path, "Output svg path");
  plot->add_option("--title", plot_args.title, "Figure title");
  plot->add_option("--extent", plot_args.axis_extent, "Axis half-width");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      cads::cmd_train(train_args);
    } else if (sample->parsed()) {
      if (sample_eta_given && sample_args.sampler.kind == "ddpm") {
        std::cerr << "warning: --eta is ignored with --sampler ddpm\n";
        sample_args.sampler.ddim_eta = 0.0;
      }
      cads::cmd_sample(sample_args);
    } else if (eval->parsed()) {
      cads::cmd_eval(eval_args);
    } else if (ablate->parsed()) {
      if (ablate_eta_given && ablate_args.base.sampler.kind == "ddpm") {
        std::cerr << "warning: --eta is ignored with --sampler ddpm\n";
        ablate_args.base.sampler.ddim_eta = 0.0;
      }
      for (const auto& spec : vary_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) {
          throw std::invalid_argument("--vary expects key=v1,v2,... got '" + spec + "'");
        }
        ablate_args.vary.emplace_back(spec.substr(0, eq), spec.substr(eq + 1));
      }
      cads::cmd_ablate(ablate_args);
    } else if (plot->parsed()) {
      cads::cmd_plot(plot_args);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
