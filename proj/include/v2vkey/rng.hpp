#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace v2vkey {

/// SplitMix64 finalizer. Used to derive independent sub-stream seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Hierarchical seed derivation: derive_seed(master, {trial, tag, ...}).
/// Every random draw in a session descends from one master seed through
/// this function, so trials can run in any order.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept;

/// Deterministic random stream. The conversions to uniform/normal variates are
/// written out here (not std::*_distribution) so draws are identical across
/// standard library implementations.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (one variate per call).
  double normal();

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace v2vkey
