#include "cads/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cads {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

class ValueParser {
 public:
  void add(std::string section, std::string key, std::string value) {
    values_[section + "." + key] = std::move(value);
  }

  bool has(const std::string& name) const { return values_.count(name) > 0; }

  template <typename T>
  void get(const std::string& name, T& out) {
    const auto it = values_.find(name);
    if (it == values_.end()) return;  // keep the default
    parse(name, it->second, out);
    consumed_.insert(name);
  }

  void check_all_consumed() const {
    for (const auto& [name, value] : values_) {
      if (!consumed_.count(name)) {
        throw std::invalid_argument("unknown config key: " + name);
      }
    }
  }

 private:
  static void parse(const std::string& name, const std::string& raw, int& out) {
    parse_number(name, raw, out);
  }
  static void parse(const std::string& name, const std::string& raw,
                    std::uint64_t& out) {
    parse_number(name, raw, out);
  }
  static void parse(const std::string& name, const std::string& raw, double& out) {
    parse_number(name, raw, out);
  }
  static void parse(const std::string& name, const std::string& raw, bool& out) {
    if (raw == "true" || raw == "1") {
      out = true;
    } else if (raw == "false" || raw == "0") {
      out = false;
    } else {
      throw std::invalid_argument("config key " + name + ": expected boolean, got '" + raw + "'");
    }
  }
  static void parse(const std::string&, const std::string& raw, std::string& out) {
    out = raw;
  }

  template <typename T>
  static void parse_number(const std::string& name, const std::string& raw, T& out) {
    const auto* end = raw.data() + raw.size();
    const auto result = std::from_chars(raw.data(), end, out);
    if (result.ec != std::errc() || result.ptr != end) {
      throw std::invalid_argument("config key " + name + ": bad numeric value '" + raw + "'");
    }
  }

  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (gmm.side < 1) throw std::invalid_argument("gmm.side must be >= 1");
  if (gmm.spacing <= 0.0) throw std::invalid_argument("gmm.spacing must be > 0");
  if (gmm.std_dev <= 0.0) throw std::invalid_argument("gmm.std must be > 0");
  train.validate();
  sampler_kind_from_string(sampler.kind);
  if (sampler.num_steps < 2) throw std::invalid_argument("sampler.num_steps must be >= 2");
  if (sampler.guidance_weight < 0.0) {
    throw std::invalid_argument("sampler.guidance_weight must be >= 0");
  }
  if (!(sampler.ddim_eta >= 0.0 && sampler.ddim_eta <= 1.0)) {
    throw std::invalid_argument("sampler.ddim_eta must be in [0,1]");
  }
  if (sampler.per_class < 1) throw std::invalid_argument("sampler.per_class must be >= 1");
  if (cads.enabled) {
    if (cads.schedule == "linear") {
      if (!(0.0 <= cads.tau1 && cads.tau1 < cads.tau2 && cads.tau2 <= 1.0)) {
        throw std::invalid_argument(
            "cads.tau1 and cads.tau2 must satisfy 0 <= tau1 < tau2 <= 1");
      }
    } else if (cads.schedule == "polynomial") {
      if (!(0.0 <= cads.tau && cads.tau < 1.0) || cads.degree < 1) {
        throw std::invalid_argument(
            "cads.tau must be in [0,1) and cads.degree >= 1");
      }
    } else {
      throw std::invalid_argument("cads.schedule must be 'linear' or 'polynomial'");
    }
    if (cads.noise_scale < 0.0) throw std::invalid_argument("cads.noise_scale must be >= 0");
    if (!(cads.psi >= 0.0 && cads.psi <= 1.0)) {
      throw std::invalid_argument("cads.psi must be in [0,1]");
    }
    noise_family_from_string(cads.noise_distribution);
  }
  if (dynamic_cfg.enabled) {
    if (!(0.0 <= dynamic_cfg.tau1 && dynamic_cfg.tau1 < dynamic_cfg.tau2 &&
          dynamic_cfg.tau2 <= 1.0)) {
      throw std::invalid_argument(
          "dynamic_cfg.tau1 and dynamic_cfg.tau2 must satisfy 0 <= tau1 < tau2 <= 1");
    }
  }
  if (metrics.knn_k < 1) throw std::invalid_argument("metrics.knn_k must be >= 1");
  if (metrics.bandwidth < 0.0) {
    throw std::invalid_argument("metrics.bandwidth must be >= 0 (0 = auto)");
  }
  if (output_dir.empty()) throw std::invalid_argument("output.dir must not be empty");
}

GmmSpec ExperimentConfig::make_gmm() const {
  return make_grid_gmm(gmm.side, gmm.spacing, gmm.std_dev);
}

AnnealSchedule ExperimentConfig::cads_anneal() const {
  if (cads.schedule == "polynomial") {
    return AnnealSchedule::polynomial(cads.tau, cads.degree);
  }
  return AnnealSchedule::piecewise_linear(cads.tau1, cads.tau2);
}

CadsConfig ExperimentConfig::cads_config() const {
  CadsConfig c;
  c.noise_scale = cads.noise_scale;
  c.mixing_factor = cads.psi;
  c.rescale = cads.rescale;
  c.noise_distribution = noise_family_from_string(cads.noise_distribution);
  c.anneal = cads_anneal();
  return c;
}

SamplerConfig ExperimentConfig::sampler_config(const GmmSpec& spec) const {
  SamplerConfig c;
  c.kind = sampler_kind_from_string(sampler.kind);
  c.num_steps = sampler.num_steps;
  c.guidance_weight = sampler.guidance_weight;
  c.ddim_eta = sampler.ddim_eta;
  c.seed = sampler.seed;
  c.threads = sampler.threads;
  c.clip_bound = data_clip_bound(spec);
  if (cads.enabled) c.cads = cads_config();
  if (dynamic_cfg.enabled) {
    c.dynamic_cfg = AnnealSchedule::piecewise_linear(dynamic_cfg.tau1, dynamic_cfg.tau2);
  }
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  ValueParser parser;
  std::istringstream is(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      static const std::set<std::string> kSections = {
          "gmm", "train", "sampler", "cads", "dynamic_cfg", "metrics", "output"};
      if (!kSections.count(section)) {
        throw std::invalid_argument("unknown config section: " + section);
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || section.empty()) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected 'key = value' inside a section");
    }
    parser.add(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }

  ExperimentConfig c;
  parser.get("gmm.side", c.gmm.side);
  parser.get("gmm.spacing", c.gmm.spacing);
  parser.get("gmm.std", c.gmm.std_dev);

  parser.get("train.epochs", c.train.epochs);
  parser.get("train.batch_size", c.train.batch_size);
  parser.get("train.learning_rate", c.train.learning_rate);
  parser.get("train.adam_beta1", c.train.adam_beta1);
  parser.get("train.adam_beta2", c.train.adam_beta2);
  parser.get("train.uncond_dropout_prob", c.train.uncond_dropout_prob);
  std::string target = to_string(c.train.target_type);
  parser.get("train.target_type", target);
  c.train.target_type = target_type_from_string(target);
  parser.get("train.samples_per_class", c.train.samples_per_class);
  parser.get("train.seed", c.train.seed);

  parser.get("sampler.kind", c.sampler.kind);
  parser.get("sampler.num_steps", c.sampler.num_steps);
  parser.get("sampler.guidance_weight", c.sampler.guidance_weight);
  parser.get("sampler.ddim_eta", c.sampler.ddim_eta);
  parser.get("sampler.seed", c.sampler.seed);
  parser.get("sampler.per_class", c.sampler.per_class);
  parser.get("sampler.threads", c.sampler.threads);

  parser.get("cads.enabled", c.cads.enabled);
  parser.get("cads.noise_scale", c.cads.noise_scale);
  parser.get("cads.tau1", c.cads.tau1);
  parser.get("cads.tau2", c.cads.tau2);
  parser.get("cads.psi", c.cads.psi);
  parser.get("cads.rescale", c.cads.rescale);
  parser.get("cads.noise_distribution", c.cads.noise_distribution);
  parser.get("cads.schedule", c.cads.schedule);
  parser.get("cads.tau", c.cads.tau);
  parser.get("cads.degree", c.cads.degree);

  parser.get("dynamic_cfg.enabled", c.dynamic_cfg.enabled);
  parser.get("dynamic_cfg.tau1", c.dynamic_cfg.tau1);
  parser.get("dynamic_cfg.tau2", c.dynamic_cfg.tau2);

  parser.get("metrics.knn_k", c.metrics.knn_k);
  parser.get("metrics.bandwidth", c.metrics.bandwidth);
  parser.get("metrics.eval_seed", c.metrics.eval_seed);

  parser.get("output.dir", c.output_dir);

  parser.check_all_consumed();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return parse_config(buffer.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "[gmm]\n";
  os << "side = " << c.gmm.side << "\n";
  os << "spacing = " << format_double(c.gmm.spacing) << "\n";
  os << "std = " << format_double(c.gmm.std_dev) << "\n\n";

  os << "[train]\n";
  os << "epochs = " << c.train.epochs << "\n";
  os << "batch_size = " << c.train.batch_size << "\n";
  os << "learning_rate = " << format_double(c.train.learning_rate) << "\n";
  os << "adam_beta1 = " << format_double(c.train.adam_beta1) << "\n";
  os << "adam_beta2 = " << format_double(c.train.adam_beta2) << "\n";
  os << "uncond_dropout_prob = " << format_double(c.train.uncond_dropout_prob) << "\n";
  os << "target_type = " << to_string(c.train.target_type) << "\n";
  os << "samples_per_class = " << c.train.samples_per_class << "\n";
  os << "seed = " << c.train.seed << "\n\n";

  os << "[sampler]\n";
  os << "kind = " << c.sampler.kind << "\n";
  os << "num_steps = " << c.sampler.num_steps << "\n";
  os << "guidance_weight = " << format_double(c.sampler.guidance_weight) << "\n";
  os << "ddim_eta = " << format_double(c.sampler.ddim_eta) << "\n";
  os << "seed = " << c.sampler.seed << "\n";
  os << "per_class = " << c.sampler.per_class << "\n";
  os << "threads = " << c.sampler.threads << "\n\n";

  os << "[cads]\n";
  os << "enabled = " << (c.cads.enabled ? "true" : "false") << "\n";
  os << "noise_scale = " << format_double(c.cads.noise_scale) << "\n";
  os << "tau1 = " << format_double(c.cads.tau1) << "\n";
  os << "tau2 = " << format_double(c.cads.tau2) << "\n";
  os << "psi = " << format_double(c.cads.psi) << "\n";
  os << "rescale = " << (c.cads.rescale ? "true" : "false") << "\n";
  os << "noise_distribution = " << c.cads.noise_distribution << "\n";
  os << "schedule = " << c.cads.schedule << "\n";
  os << "tau = " << format_double(c.cads.tau) << "\n";
  os << "degree = " << c.cads.degree << "\n\n";

  os << "[dynamic_cfg]\n";
  os << "enabled = " << (c.dynamic_cfg.enabled ? "true" : "false") << "\n";
  os << "tau1 = " << format_double(c.dynamic_cfg.tau1) << "\n";
  os << "tau2 = " << format_double(c.dynamic_cfg.tau2) << "\n\n";

  os << "[metrics]\n";
  os << "knn_k = " << c.metrics.knn_k << "\n";
  os << "bandwidth = " << format_double(c.metrics.bandwidth) << "\n";
  os << "eval_seed = " << c.metrics.eval_seed << "\n\n";

  os << "[output]\n";
  os << "dir = " << c.output_dir << "\n";
  return os.str();
}

}  // namespace cads
