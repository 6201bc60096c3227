#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace hcembed {

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Deterministic random source. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; all derived variates are computed here
/// (not via <random> distributions, whose algorithms are implementation
/// defined) so identical seeds give identical values on every platform.
///
/// Normal deviates use the Box-Muller transform; both deviates of a pair
/// are consumed in order.
class SeedableRng {
 public:
  explicit SeedableRng(std::uint64_t seed);

  /// Counter-based stream: the generator for (seed, stream, index) does not
  /// depend on how many other streams were drawn before it.
  static SeedableRng stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1].
  double uniform_open0();
  double normal();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  /// k distinct indices from [0, n), uniform without replacement
  /// (partial Fisher-Yates), in draw order. Throws ArgumentError if k > n.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hcembed
