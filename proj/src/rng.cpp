#include "topicdiv/rng.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace topicdiv {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  const std::uint64_t mask = ~0ULL >> std::countl_zero(n | 1);
  std::uint64_t x;
  do {
    x = bits() & mask;
  } while (x >= n);
  return x;
}

double Rng::normal() {
  const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) throw std::invalid_argument("Rng::gamma: shape must be positive");
  if (shape < 1.0) {
    const double u = 1.0 - uniform01();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = 1.0 - uniform01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> Rng::dirichlet(const std::vector<double>& concentration) {
  if (concentration.empty()) throw std::invalid_argument("Rng::dirichlet: empty concentration");
  std::vector<double> out(concentration.size());
  double total = 0.0;
  for (std::size_t i = 0; i < concentration.size(); ++i) {
    out[i] = gamma(concentration[i]);
    total += out[i];
  }
  if (total <= 0.0) throw std::runtime_error("Rng::dirichlet: degenerate draw");
  for (double& x : out) x /= total;
  return out;
}

std::uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file for hashing: " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace topicdiv
