#pragma once

#include <cstdint>
#include <random>

namespace klrisk {

/// Seedable source of uniforms on the open interval (0, 1).
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard, seeded with a splitmix64 scramble of the user seed. Uniforms are
/// built from the top 53 bits by hand (std::uniform_real_distribution is not
/// portable), so draws are bit-identical across conforming platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Uniform in (0, 1); never returns 0 or 1.
  double uniform();

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Seed of the `index`-th independent stream derived from `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace klrisk
