#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace cads {

inline constexpr int kDataDim = 2;
inline constexpr int kTimeEmbedDim = 16;
inline constexpr int kClassEmbedDim = 16;

enum class TargetType : std::uint32_t { kEpsilon = 0, kVelocity = 1 };

TargetType target_type_from_string(std::string_view name);
std::string to_string(TargetType t);

// 16 sinusoidal features of t with geometrically spaced frequencies.
Eigen::VectorXd time_embedding(double t);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

// Small fully connected denoiser: input [z, time features, class embedding],
// SiLU hidden activations, linear 2D head. The class table holds one learned
// row per component plus a trailing null-condition row. All parameters and
// arithmetic are 64-bit.
struct Denoiser {
  TargetType target_type = TargetType::kEpsilon;
  int num_classes = 0;                 // K; class_table has K+1 rows
  std::vector<DenseLayer> layers;      // hidden stack plus linear head
  Eigen::MatrixXd class_table;         // (K+1) x kClassEmbedDim

  static Denoiser create(int num_classes, TargetType target_type,
                         std::uint64_t init_seed, int hidden_dim = 128,
                         int num_hidden = 3);

  int input_dim() const { return kDataDim + kTimeEmbedDim + kClassEmbedDim; }
  Eigen::VectorXd class_embedding(int label) const;  // label -1 or K = null
  Eigen::VectorXd null_embedding() const;

  Eigen::Vector2d forward(const Eigen::Vector2d& z, double t,
                          const Eigen::VectorXd& cond) const;

  // Lockstep evaluation of many chains at one time step.
  // z: 2 x B, cond: kClassEmbedDim x B; returns 2 x B.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& z, double t,
                                const Eigen::MatrixXd& cond) const;

  std::size_t num_params() const;
};

struct EpsAndX {
  Eigen::Vector2d eps;
  Eigen::Vector2d x;
};

// Converts a network prediction into the (eps_hat, x_hat) pair consistent
// with z = alpha * x_hat + sigma * eps_hat.
EpsAndX prediction_to_eps_and_x(const Eigen::Vector2d& pred,
                                const Eigen::Vector2d& z, double alpha,
                                double sigma, TargetType target_type);

// Binary checkpoint: magic "CADS", version, architecture header, then all
// parameters as little-endian IEEE-754 doubles in layer order. Round-trips
// bitwise.
void save_checkpoint(const std::filesystem::path& path, const Denoiser& model);
Denoiser load_checkpoint(const std::filesystem::path& path);

}  // namespace cads
