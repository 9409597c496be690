#pragma once

#include <cstdint>
#include <random>

namespace tailpool {

/// splitmix64 finalizer; used to spread user seeds and derive substreams.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seeded pseudo-random stream. mt19937_64 output is identical on every
/// platform and uniforms are built directly from the raw 64-bit output, so
/// seeded runs are reproducible bit-for-bit everywhere.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(mix64(seed)) {}

  /// Independent stream for replication `index` of a master-seeded run.
  /// Counter-based, so any subset of replications can be generated in any
  /// order (or in parallel) with identical results.
  static RngStream substream(std::uint64_t master_seed, std::uint64_t index) {
    return RngStream(mix64(master_seed) ^ mix64(index * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1): bin centers of a 2^53 grid.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard exponential via inverse transform.
  double exponential() { return -std::log(uniform()); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tailpool
