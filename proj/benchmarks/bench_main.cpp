#include <benchmark/benchmark.h>

#include "cads/metrics.hpp"
#include "cads/sampler.hpp"
#include "cads/training.hpp"

namespace {

using namespace cads;

void DenoiserForward(benchmark::State& state) {
  const Denoiser model = Denoiser::create(25, TargetType::kEpsilon, 1);
  const Eigen::Vector2d z(0.3, -0.7);
  const Eigen::VectorXd cond = model.class_embedding(7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(z, 0.5, cond));
  }
}
BENCHMARK(DenoiserForward);

void DenoiserForwardBatch(benchmark::State& state) {
  const Denoiser model = Denoiser::create(25, TargetType::kEpsilon, 1);
  const auto b = state.range();
  Eigen::MatrixXd z = Eigen::MatrixXd::Random(2, b);
  Eigen::MatrixXd cond = model.class_embedding(7).replicate(1, b);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward_batch(z, 0.5, cond));
  }
  state.SetItemsProcessed(state.iterations() * b);
}
BENCHMARK(DenoiserForwardBatch)->Arg(64)->Arg(256)->Arg(1024);

void AnalyticScore25(benchmark::State& state) {
  const GmmSpec spec = make_grid_gmm(5, 2.0, 0.1);
  const Eigen::Vector2d z(0.9, -1.4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(analytic_score(spec, z, 0.8, 0.6));
  }
}
BENCHMARK(AnalyticScore25);

void TrainingBatch(benchmark::State& state) {
  const GmmSpec spec = make_grid_gmm(5, 2.0, 0.1);
  const Denoiser model = Denoiser::create(25, TargetType::kEpsilon, 1);
  const DiffusionSchedule schedule = build_cosine_vp_schedule(100);
  RngStream data_rng(2);
  const auto batch = gmm_sample(spec, std::nullopt, 250, data_rng);
  TrainConfig cfg;
  RngStream rng(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(training_loss(model, batch, schedule, rng, cfg));
  }
  state.SetItemsProcessed(state.iterations() * 250);
}
BENCHMARK(TrainingBatch);

void OracleChainDdpm(benchmark::State& state) {
  const GmmSpec spec = make_grid_gmm(5, 2.0, 0.1);
  SamplerConfig cfg;
  cfg.num_steps = 100;
  cfg.guidance_weight = 5.0;
  const DiffusionSchedule schedule = build_cosine_vp_schedule(100);
  const std::vector<int> labels(32, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        sample_batch(OracleSource{&spec}, labels, cfg, schedule));
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(OracleChainDdpm);

void VendiScore(benchmark::State& state) {
  const GmmSpec spec = make_grid_gmm(5, 2.0, 0.1);
  RngStream rng(4);
  std::vector<Eigen::Vector2d> points;
  for (const auto& s : gmm_sample(spec, std::nullopt, state.range(), rng)) {
    points.push_back(s.point);
  }
  const SimilarityMatrix k = similarity_matrix(points);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vendi_score(k));
  }
}
BENCHMARK(VendiScore)->Arg(100)->Arg(400);

}  // namespace

BENCHMARK_MAIN();
