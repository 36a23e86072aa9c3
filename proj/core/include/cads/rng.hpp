#pragma once

#include <cstdint>
#include <random>

namespace cads {

// Purpose tags for deriving independent sub-streams from one master seed.
// Keeping the tags fixed means enabling an optional feature (e.g. condition
// corruption) never shifts the draws seen by any other consumer.
enum class StreamPurpose : std::uint64_t {
  kChainInit = 1,
  kAncestral = 2,
  kConditionNoise = 3,
  kDataset = 4,
  kTraining = 5,
  kEvalReference = 6,
};

// Deterministic random stream, copyable value type. Streams for different
// (seed, chain, purpose) triples are derived by splitmix64 mixing, so chains
// can run in any order or in parallel with identical results.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  static RngStream derive(std::uint64_t master_seed, std::uint64_t chain,
                          StreamPurpose purpose);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0,1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; always consumes exactly two uniforms.
  double normal();

  // Exponential(1); one uniform.
  double exponential() ;

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace cads
