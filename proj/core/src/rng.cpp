#include "cads/rng.hpp"

#include <cmath>

namespace cads {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

RngStream RngStream::derive(std::uint64_t master_seed, std::uint64_t chain,
                            StreamPurpose purpose) {
  std::uint64_t s = splitmix64(master_seed);
  s = splitmix64(s ^ (chain + 1));
  s = splitmix64(s ^ (static_cast<std::uint64_t>(purpose) << 32));
  return RngStream(s);
}

double RngStream::normal() {
  const double u1 = uniform01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log1p(-u1));
  return r * std::cos(2.0 * M_PI * u2);
}

double RngStream::exponential() { return -std::log1p(-uniform01()); }

std::uint64_t RngStream::below(std::uint64_t n) {
  // Rejection-free modulo is biased for huge n; n here is always small
  // (component counts, batch sizes), so the bias is negligible. Use
  // multiply-shift to avoid even that.
  const unsigned __int128 wide =
      static_cast<unsigned __int128>(engine_()) * static_cast<unsigned __int128>(n);
  return static_cast<std::uint64_t>(wide >> 64);
}

}  // namespace cads
