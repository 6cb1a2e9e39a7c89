#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace lnn {

// xoshiro256** (Blackman & Vigna) seeded through splitmix64. Every random
// draw in the project goes through this generator so that wirings, subsets
// and initializations reproduce bit-for-bit on any platform:
//   state[i] = splitmix64(seed) for i = 0..3 (successive outputs)
//   uniform() = (next() >> 11) * 2^-53
//   below(n)  = high 64 bits of next() * n (128-bit product)
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();
  double uniform(double lo, double hi);
  std::size_t below(std::size_t n);
  // Box-Muller, one draw per call (second value discarded).
  double normal();

  // First k entries of a seeded Fisher-Yates shuffle of 0..n-1.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace lnn
