#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

#include "omiga/errors.hpp"

namespace omiga {

/// Derive a child seed from a master seed and a named stream. Every source of
/// randomness in the project flows from one master seed through this function,
/// so components stay reproducible independently of each other.
uint64_t derive_seed(uint64_t master, std::string_view stream, uint64_t index = 0);

/// Deterministic random stream. Wraps mt19937_64 with hand-rolled
/// distributions so results are identical across platforms and toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  int uniform_int(int n) {
    if (n <= 0) throw ParamError("uniform_int: n must be positive");
    const int k = static_cast<int>(uniform() * n);
    return k >= n ? n - 1 : k;
  }

  /// Sample an index from a probability row.
  int categorical(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;  // guard against rounding
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace omiga
