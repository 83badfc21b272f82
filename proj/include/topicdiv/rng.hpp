#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "topicdiv/hashing.hpp"

namespace topicdiv {

// Deterministic RNG facade over mt19937_64. Every mapping from raw bits to a
// distribution lives here, because the <random> distribution adaptors are
// implementation-defined and would break cross-toolchain reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(mix64(seed)) {}

  std::uint64_t bits() { return gen_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(bits() >> 11) * 0x1p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer on [0, n). Masked rejection, unbiased.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller (cosine branch).
  double normal();

  double normal(double mu, double sd) { return mu + sd * normal(); }

  // Gamma(shape, 1) via Marsaglia-Tsang; shape > 0.
  double gamma(double shape);

  std::vector<double> dirichlet(const std::vector<double>& concentration);

  // Fisher-Yates, identical sequence on every platform.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace topicdiv
