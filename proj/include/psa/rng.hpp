#pragma once

#include <array>
#include <cstdint>

namespace psa {

// xoshiro256** (Blackman & Vigna) seeded through splitmix64.
//
// The 64-bit output stream is a pure function of the seed, so it is
// bit-identical across runs, compilers and platforms. Floating-point draws
// derived from it (uniform, normal) are identical on any IEEE-754 platform
// with the same libm.
//
// Rng is single-owner. Parallel code derives children with split(stream):
// the child is seeded with splitmix64(seed ^ splitmix64(stream + 1)) and does
// not depend on how many values the parent has already produced.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;

  // Uniform integer on [0, bound); bound must be positive. Lemire's method
  // with rejection, so there is no modulo bias.
  std::uint64_t uniform_index(std::uint64_t bound) noexcept;

  // Standard normal via the Box-Muller transform. The second variate of each
  // pair is cached.
  double normal() noexcept;

  Rng split(std::uint64_t stream) const noexcept;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace psa
