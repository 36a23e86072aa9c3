#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cads/commands.hpp"
#include "cads/csv.hpp"
#include "cads/manifest.hpp"
#include "cads/metrics.hpp"
#include "cads/svg_plot.hpp"

using namespace cads;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  return std::string((std::istreambuf_iterator<char>(is)), {});
}

// Minimal XML well-formedness check: tag stack balance, no external refs.
bool well_formed_xml(const std::string& text) {
  if (text.find("<!DOCTYPE") != std::string::npos) return false;
  if (text.find("href") != std::string::npos) return false;
  std::vector<std::string> stack;
  std::size_t at = 0;
  while ((at = text.find('<', at)) != std::string::npos) {
    const std::size_t end = text.find('>', at);
    if (end == std::string::npos) return false;
    std::string tag = text.substr(at + 1, end - at - 1);
    at = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    const bool closing = tag[0] == '/';
    const bool self_closing = tag.back() == '/';
    if (closing) tag = tag.substr(1);
    const std::string name = tag.substr(0, tag.find_first_of(" \t/"));
    if (name.empty()) return false;
    if (closing) {
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else if (!self_closing) {
      stack.push_back(name);
    }
  }
  return stack.empty();
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("config round-trips through serialization") {
  ExperimentConfig c;
  c.gmm.side = 3;
  c.gmm.spacing = 1.75;
  c.gmm.std_dev = 0.12345678901234567;
  c.train.epochs = 17;
  c.train.learning_rate = 3.0e-4;
  c.train.target_type = TargetType::kVelocity;
  c.sampler.kind = "ddim";
  c.sampler.ddim_eta = 0.33333333333333331;
  c.sampler.seed = 987654321;
  c.cads.enabled = true;
  c.cads.noise_scale = 0.15;
  c.cads.tau1 = 0.6;
  c.cads.psi = 0.5;
  c.cads.rescale = false;
  c.cads.noise_distribution = "laplace";
  c.dynamic_cfg.enabled = true;
  c.metrics.bandwidth = 0.25;
  c.output_dir = "runs/exp1";

  const ExperimentConfig back = parse_config(serialize_config(c));
  CHECK(back == c);
  // a second round trip is byte-stable
  CHECK(serialize_config(back) == serialize_config(c));
}

TEST_CASE("defaults parse from an empty config") {
  const ExperimentConfig c = parse_config("");
  CHECK(c == ExperimentConfig{});
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("unknown keys and sections are named") {
  CHECK_THROWS_WITH_AS(parse_config("[gmm]\nsides = 5\n"),
                       doctest::Contains("gmm.sides"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("[gym]\nside = 5\n"),
                       doctest::Contains("gym"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("side = 5\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("[gmm]\nside = five\n"), std::invalid_argument);
}

TEST_CASE("invalid annealing knots are rejected naming both fields") {
  ExperimentConfig c;
  c.cads.enabled = true;
  c.cads.tau1 = 0.9;
  c.cads.tau2 = 0.6;
  try {
    c.validate();
    FAIL("expected validation to throw");
  } catch (const std::invalid_argument& e) {
    const std::string message = e.what();
    CHECK(message.find("tau1") != std::string::npos);
    CHECK(message.find("tau2") != std::string::npos);
  }
}

TEST_CASE("samples csv round-trips exactly") {
  TempDir dir("cads_csv_test");
  std::vector<ChainResult> rows;
  RngStream rng(5);
  for (int i = 0; i < 100; ++i) {
    ChainResult r;
    r.label = static_cast<int>(rng.below(25));
    r.chain = i;
    r.point = Eigen::Vector2d(rng.normal() / 3.0, rng.normal() * 1e-7);
    rows.push_back(r);
  }
  rows[0].label = -1;
  const auto path = dir.path / "samples.csv";
  write_samples_csv(path, rows);
  const auto back = read_samples_csv(path);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].label == rows[i].label);
    CHECK(back[i].chain == rows[i].chain);
    CHECK(back[i].point == rows[i].point);  // 17 significant digits
  }

  const std::string text = slurp(path);
  CHECK(text.rfind("label,chain,x0,x1\n", 0) == 0);
  CHECK(text.find('\r') == std::string::npos);
}

TEST_CASE("dataset csv round-trips exactly") {
  TempDir dir("cads_csv_test2");
  const GmmSpec spec = make_grid_gmm(3, 2.0, 0.2);
  RngStream rng(6);
  const auto samples = gmm_sample(spec, std::nullopt, 200, rng);
  const auto path = dir.path / "data.csv";
  write_dataset_csv(path, samples);
  const auto back = read_dataset_csv(path);
  REQUIRE(back.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(back[i].label == samples[i].label);
    CHECK(back[i].point == samples[i].point);
  }
  CHECK_THROWS_AS(read_samples_csv(path), std::runtime_error);  // wrong header
}

TEST_CASE("manifest verifies hashes and existence") {
  TempDir dir("cads_manifest_test");
  std::ofstream(dir.path / "artifact.txt") << "payload";
  RunManifest m;
  m.command = "test";
  m.config_text = "[gmm]\n";
  m.inputs.push_back({"artifact.txt", fnv1a64_hex(dir.path / "artifact.txt")});
  m.seed = 5;
  const auto manifest_path = dir.path / "manifest.json";
  write_manifest(manifest_path, m);
  CHECK_NOTHROW(verify_manifest(manifest_path));

  const RunManifest back = read_manifest(manifest_path);
  CHECK(back.command == m.command);
  CHECK(back.inputs.size() == 1);

  std::ofstream(dir.path / "artifact.txt") << "tampered";
  CHECK_THROWS_AS(verify_manifest(manifest_path), std::runtime_error);

  RunManifest missing;
  missing.samples_path = "not_there.csv";
  CHECK_THROWS_AS(write_manifest(dir.path / "bad.json", missing), std::runtime_error);
}

TEST_CASE("directory lock excludes concurrent writers") {
  TempDir dir("cads_lock_test");
  {
    DirectoryLock lock(dir.path);
    CHECK_THROWS_AS(DirectoryLock(dir.path), std::runtime_error);
  }
  CHECK_NOTHROW(DirectoryLock(dir.path));  // released on destruction
}

TEST_CASE("scatter svg is well-formed and self-contained") {
  TempDir dir("cads_svg_test");
  const GmmSpec spec = make_grid_gmm(5, 2.0, 0.1);
  RngStream rng(9);
  std::vector<ScatterPanel> panels(3);
  for (int p = 0; p < 3; ++p) {
    panels[p].title = "panel " + std::to_string(p) + " <s=0.15 & psi=\"1\">";
    for (const auto& s : gmm_sample(spec, std::nullopt, 200, rng)) {
      ChainResult r;
      r.point = s.point;
      r.label = s.label;
      panels[p].points.push_back(r);
    }
  }
  const auto path = dir.path / "figure.svg";
  write_scatter_svg(path, panels, 4.5, "toy mixture");
  const std::string text = slurp(path);
  CHECK(well_formed_xml(text));
  CHECK(text.find("<svg") != std::string::npos);
  CHECK(text.find("version=\"1.1\"") != std::string::npos);
  // one panel rectangle per input
  std::size_t rects = 0, at = 0;
  while ((at = text.find("<rect", at)) != std::string::npos) {
    ++rects;
    at += 5;
  }
  CHECK(rects == 4);  // background + three panels

  CHECK_THROWS_AS(write_scatter_svg(dir.path / "x.svg", {}, 4.5, "t"),
                  std::invalid_argument);
}

TEST_CASE("sample and eval commands produce a coherent run") {
  TempDir dir("cads_cmd_test");
  SampleArgs sample;
  sample.use_oracle = true;
  sample.gmm.side = 2;  // 4 components keeps it quick
  sample.sampler.num_steps = 40;
  sample.sampler.guidance_weight = 1.0;
  sample.sampler.per_class = 50;
  sample.sampler.seed = 11;
  sample.sampler.threads = 2;
  sample.out_dir = (dir.path / "run").string();
  cmd_sample(sample);

  const auto samples_path = dir.path / "run" / "samples.csv";
  REQUIRE(fs::exists(samples_path));
  const auto rows = read_samples_csv(samples_path);
  CHECK(rows.size() == 200);  // per_class * components
  CHECK_NOTHROW(verify_manifest(dir.path / "run" / "sample_manifest.json"));

  // identical rerun produces identical bytes
  SampleArgs again = sample;
  again.out_dir = (dir.path / "run2").string();
  cmd_sample(again);
  CHECK(slurp(samples_path) == slurp(dir.path / "run2" / "samples.csv"));

  EvalArgs eval;
  eval.samples_path = samples_path.string();
  eval.gmm = sample.gmm;
  eval.out_dir = (dir.path / "eval").string();
  cmd_eval(eval);
  REQUIRE(fs::exists(dir.path / "eval" / "metrics.json"));
  REQUIRE(fs::exists(dir.path / "eval" / "per_condition.csv"));
  const std::string json_text = slurp(dir.path / "eval" / "metrics.json");
  CHECK(json_text.find("\"recall\"") != std::string::npos);
  CHECK(json_text.find("\"per_condition\"") != std::string::npos);

  // samples evaluated against themselves as reference: perfect scores
  std::vector<LabeledSample> as_reference;
  for (const auto& r : rows) as_reference.push_back({r.point, r.label});
  write_dataset_csv(dir.path / "self.csv", as_reference);
  EvalArgs self_eval;
  self_eval.samples_path = samples_path.string();
  self_eval.reference_path = (dir.path / "self.csv").string();
  self_eval.gmm = sample.gmm;
  self_eval.out_dir = (dir.path / "self_eval").string();
  cmd_eval(self_eval);
  const std::string self_json = slurp(dir.path / "self_eval" / "metrics.json");
  CHECK(self_json.find("\"recall\": 1.0") != std::string::npos);
  CHECK(self_json.find("\"precision\": 1.0") != std::string::npos);

  PlotArgs plot;
  plot.sample_csvs = {samples_path.string(), (dir.path / "run2" / "samples.csv").string()};
  plot.out_path = (dir.path / "fig.svg").string();
  cmd_plot(plot);
  CHECK(well_formed_xml(slurp(dir.path / "fig.svg")));
}

TEST_CASE("eval rejects label mismatches and empty inputs") {
  TempDir dir("cads_cmd_eval_guard");
  const GmmSpec spec = make_grid_gmm(2, 2.0, 0.1);
  RngStream rng(12);
  std::vector<ChainResult> rows;
  int chain = 0;
  for (const auto& s : gmm_sample(spec, 0, 20, rng)) {
    rows.push_back({s.point, s.label, chain++, 0, {}});
  }
  for (const auto& s : gmm_sample(spec, 1, 20, rng)) {
    rows.push_back({s.point, s.label, chain++, 0, {}});
  }
  write_samples_csv(dir.path / "samples.csv", rows);

  std::vector<LabeledSample> reference;
  for (const auto& s : gmm_sample(spec, 0, 30, rng)) reference.push_back(s);
  for (const auto& s : gmm_sample(spec, 2, 30, rng)) reference.push_back(s);
  write_dataset_csv(dir.path / "ref.csv", reference);

  EvalArgs eval;
  eval.samples_path = (dir.path / "samples.csv").string();
  eval.reference_path = (dir.path / "ref.csv").string();
  eval.gmm.side = 2;
  eval.out_dir = (dir.path / "out").string();
  try {
    cmd_eval(eval);
    FAIL("expected a label-set mismatch error");
  } catch (const std::invalid_argument& e) {
    const std::string message = e.what();
    CHECK(message.find("missing from reference: 1") != std::string::npos);
    CHECK(message.find("missing from samples: 2") != std::string::npos);
  }

  std::ofstream(dir.path / "empty.csv") << "label,chain,x0,x1\n";
  EvalArgs empty_eval;
  empty_eval.samples_path = (dir.path / "empty.csv").string();
  empty_eval.out_dir = (dir.path / "out2").string();
  CHECK_THROWS_AS(cmd_eval(empty_eval), std::runtime_error);
}

TEST_CASE("ablate rejects an empty grid") {
  AblateArgs args;
  args.base.use_oracle = true;
  CHECK_THROWS_AS(cmd_ablate(args), std::invalid_argument);
}

TEST_CASE("output directory env override wins") {
  ::setenv("CADS_OUTPUT_DIR", "/tmp/cads_env_dir", 1);
  CHECK(resolve_output_dir("other") == "/tmp/cads_env_dir");
  ::unsetenv("CADS_OUTPUT_DIR");
  CHECK(resolve_output_dir("other") == "other");
}

}  // TEST_SUITE
