#include "hcembed/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "hcembed/core.hpp"

namespace hcembed {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

SeedableRng::SeedableRng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

SeedableRng SeedableRng::stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return SeedableRng(mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL)) ^ mix64(~index));
}

double SeedableRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double SeedableRng::uniform_open0() {
  return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
}

double SeedableRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_open0();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t SeedableRng::below(std::uint64_t bound) {
  // Lemire's multiply-shift with rejection; unbiased.
  unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = -bound % bound;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(engine_()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

std::vector<std::size_t> SeedableRng::sample_without_replacement(std::size_t n, std::size_t k) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  if (k > n) throw ArgumentError("cannot draw " + std::to_string(k) + " of " + std::to_string(n) + " without replacement");
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace hcembed
