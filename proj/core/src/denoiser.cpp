#include "cads/denoiser.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "cads/rng.hpp"

namespace cads {

namespace {

constexpr char kMagic[4] = {'C', 'A', 'D', 'S'};
constexpr std::uint32_t kFormatVersion = 1;

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

void silu_inplace(Eigen::MatrixXd& m) {
  m = m.unaryExpr([](double x) { return silu(x); });
}

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char buf[4];
  is.read(reinterpret_cast<char*>(buf), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

double read_f64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

TargetType target_type_from_string(std::string_view name) {
  if (name == "epsilon") return TargetType::kEpsilon;
  if (name == "velocity") return TargetType::kVelocity;
  throw std::invalid_argument("unknown target type: " + std::string(name));
}

std::string to_string(TargetType t) {
  return t == TargetType::kEpsilon ? "epsilon" : "velocity";
}

Eigen::VectorXd time_embedding(double t) {
  Eigen::VectorXd e(kTimeEmbedDim);
  constexpr int kPairs = kTimeEmbedDim / 2;
  for (int j = 0; j < kPairs; ++j) {
    // Frequencies from 1 to 1000, geometric.
    const double freq = std::pow(1000.0, static_cast<double>(j) / (kPairs - 1));
    e[2 * j] = std::sin(freq * t);
    e[2 * j + 1] = std::cos(freq * t);
  }
  return e;
}

Denoiser Denoiser::create(int num_classes, TargetType target_type,
                          std::uint64_t init_seed, int hidden_dim,
                          int num_hidden) {
  if (num_classes < 1) throw std::invalid_argument("Denoiser needs K >= 1");
  if (hidden_dim < 1 || num_hidden < 1) {
    throw std::invalid_argument("Denoiser needs positive hidden sizes");
  }
  Denoiser m;
  m.target_type = target_type;
  m.num_classes = num_classes;
  RngStream rng = RngStream::derive(init_seed, 0, StreamPurpose::kTraining);

  auto init_layer = [&](int out, int in) {
    DenseLayer layer;
    layer.weight.resize(out, in);
    const double scale = std::sqrt(2.0 / in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) layer.weight(r, c) = scale * rng.normal();
    }
    layer.bias = Eigen::VectorXd::Zero(out);
    return layer;
  };

  const int in_dim = kDataDim + kTimeEmbedDim + kClassEmbedDim;
  m.layers.push_back(init_layer(hidden_dim, in_dim));
  for (int i = 1; i < num_hidden; ++i) {
    m.layers.push_back(init_layer(hidden_dim, hidden_dim));
  }
  m.layers.push_back(init_layer(kDataDim, hidden_dim));

  m.class_table.resize(num_classes + 1, kClassEmbedDim);
  for (int r = 0; r <= num_classes; ++r) {
    for (int c = 0; c < kClassEmbedDim; ++c) {
      m.class_table(r, c) = 0.5 * rng.normal();
    }
  }
  return m;
}

Eigen::VectorXd Denoiser::class_embedding(int label) const {
  if (label < 0 || label >= num_classes) return null_embedding();
  return class_table.row(label).transpose();
}

Eigen::VectorXd Denoiser::null_embedding() const {
  return class_table.row(num_classes).transpose();
}

Eigen::Vector2d Denoiser::forward(const Eigen::Vector2d& z, double t,
                                  const Eigen::VectorXd& cond) const {
  if (cond.size() != kClassEmbedDim) {
    throw std::invalid_argument("Denoiser::forward: condition dimension mismatch");
  }
  Eigen::VectorXd h(input_dim());
  h.head<kDataDim>() = z;
  h.segment<kTimeEmbedDim>(kDataDim) = time_embedding(t);
  h.tail<kClassEmbedDim>() = cond;
  const int last = static_cast<int>(layers.size()) - 1;
  for (int i = 0; i < last; ++i) {
    h = (layers[i].weight * h + layers[i].bias).eval();
    h = h.unaryExpr([](double x) { return silu(x); });
  }
  return layers[last].weight * h + layers[last].bias;
}

Eigen::MatrixXd Denoiser::forward_batch(const Eigen::MatrixXd& z, double t,
                                        const Eigen::MatrixXd& cond) const {
  if (z.rows() != kDataDim || cond.rows() != kClassEmbedDim ||
      z.cols() != cond.cols()) {
    throw std::invalid_argument("Denoiser::forward_batch: shape mismatch");
  }
  const auto b = z.cols();
  Eigen::MatrixXd h(input_dim(), b);
  h.topRows<kDataDim>() = z;
  h.middleRows<kTimeEmbedDim>(kDataDim) = time_embedding(t).replicate(1, b);
  h.bottomRows<kClassEmbedDim>() = cond;
  const int last = static_cast<int>(layers.size()) - 1;
  for (int i = 0; i < last; ++i) {
    h = (layers[i].weight * h).colwise() + layers[i].bias;
    silu_inplace(h);
  }
  return (layers[last].weight * h).colwise() + layers[last].bias;
}

std::size_t Denoiser::num_params() const {
  std::size_t n = 0;
  for (const auto& layer : layers) {
    n += static_cast<std::size_t>(layer.weight.size()) + layer.bias.size();
  }
  return n + static_cast<std::size_t>(class_table.size());
}

EpsAndX prediction_to_eps_and_x(const Eigen::Vector2d& pred,
                                const Eigen::Vector2d& z, double alpha,
                                double sigma, TargetType target_type) {
  if (alpha <= 0.0) {
    throw std::invalid_argument("prediction_to_eps_and_x needs alpha > 0");
  }
  EpsAndX out;
  if (target_type == TargetType::kEpsilon) {
    out.eps = pred;
    out.x = (z - sigma * pred) / alpha;
  } else {
    // v = alpha*eps - sigma*x; with alpha^2 + sigma^2 = 1:
    out.x = alpha * z - sigma * pred;
    out.eps = sigma * z + alpha * pred;
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Denoiser& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, 4);
  write_u32(os, kFormatVersion);
  write_u32(os, static_cast<std::uint32_t>(model.target_type));
  write_u32(os, static_cast<std::uint32_t>(model.num_classes));
  write_u32(os, static_cast<std::uint32_t>(model.layers.size()));
  for (const auto& layer : model.layers) {
    write_u32(os, static_cast<std::uint32_t>(layer.weight.rows()));
    write_u32(os, static_cast<std::uint32_t>(layer.weight.cols()));
  }
  write_u32(os, static_cast<std::uint32_t>(model.class_table.rows()));
  write_u32(os, static_cast<std::uint32_t>(model.class_table.cols()));
  // Parameters: per layer W row-major then bias; then the class table rows.
  for (const auto& layer : model.layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        write_f64(os, layer.weight(r, c));
      }
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) write_f64(os, layer.bias[i]);
  }
  for (Eigen::Index r = 0; r < model.class_table.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.class_table.cols(); ++c) {
      write_f64(os, model.class_table(r, c));
    }
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path.string());
}

Denoiser load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("bad checkpoint magic: " + path.string());
  }
  const std::uint32_t version = read_u32(is);
  if (version != kFormatVersion) {
    throw std::runtime_error("unsupported checkpoint version");
  }
  Denoiser m;
  m.target_type = static_cast<TargetType>(read_u32(is));
  m.num_classes = static_cast<int>(read_u32(is));
  const std::uint32_t num_layers = read_u32(is);
  m.layers.resize(num_layers);
  for (auto& layer : m.layers) {
    const std::uint32_t rows = read_u32(is);
    const std::uint32_t cols = read_u32(is);
    layer.weight.resize(rows, cols);
    layer.bias.resize(rows);
  }
  const std::uint32_t table_rows = read_u32(is);
  const std::uint32_t table_cols = read_u32(is);
  m.class_table.resize(table_rows, table_cols);
  for (auto& layer : m.layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = read_f64(is);
      }
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = read_f64(is);
  }
  for (Eigen::Index r = 0; r < m.class_table.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.class_table.cols(); ++c) {
      m.class_table(r, c) = read_f64(is);
    }
  }
  if (!is) throw std::runtime_error("truncated checkpoint: " + path.string());
  return m;
}

}  // namespace cads
