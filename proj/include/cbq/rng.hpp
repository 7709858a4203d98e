#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cbq {

// Seedable random stream used everywhere randomness enters the pipeline.
//
// Algorithm (version 1): std::mt19937_64, whose output sequence is fixed by
// the C++ standard. Conversions to real numbers are done here rather than
// through <random> distributions, which are implementation-defined:
//   uniform()  = (next() >> 11) * 2^-53          in [0, 1)
//   index(n)   = min(floor(uniform() * n), n - 1)
//   normal()   = Box-Muller on two uniform() draws (cosine branch only)
class Rng {
 public:
  static constexpr int kAlgorithmVersion = 1;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();
  std::size_t index(std::size_t n);
  double normal();

 private:
  std::mt19937_64 engine_;
};

// Seed for the stream owned by one group of one tensor:
// splitmix64(splitmix64(seed ^ fnv1a64(tensor_name)) + group_index).
std::uint64_t derive_stream_seed(std::uint64_t seed, std::string_view tensor_name,
                                 std::uint64_t group_index);

}  // namespace cbq
