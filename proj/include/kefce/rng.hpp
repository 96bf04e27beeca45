#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "kefce/errors.hpp"

namespace kefce {

// Seeded RNG with platform-independent sampling primitives. std::mt19937_64
// has a pinned bit stream, and we avoid std::*_distribution because their
// output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Index sampled from an (unnormalized) nonnegative weight vector. Never
  // returns a zero-weight index.
  int categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0) throw RangeError("categorical: weights sum to zero");
    double u = uniform() * total;
    double acc = 0.0;
    int last_positive = -1;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (weights[k] <= 0.0) continue;
      last_positive = static_cast<int>(k);
      acc += weights[k];
      if (u < acc) return last_positive;
    }
    return last_positive;
  }

  std::uint64_t next_raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace kefce
