#include "hetmed/rng.hpp"

#include <cmath>

#include "hetmed/dist.hpp"

namespace hetmed {

namespace {

// FNV-1a over the label so textual stream names land on distinct keys.
std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char ch : label) {
    h ^= ch;
    h *= 0x00000100000001B3ull;
  }
  return h;
}

}  // namespace

Rng Rng::fork(std::string_view label, std::uint64_t a, std::uint64_t b,
              std::uint64_t c) const {
  Rng child(key_ ^ hash_label(label), 0);
  return child.fork_idx(a, b, c);
}

double Rng::normal() { return detail::normal_quantile_fast(uniform()); }

double Rng::gamma(double shape, double rate) {
  if (shape < 1.0) {
    // Boost trick: G(shape) = G(shape+1) * U^(1/shape).
    double u = uniform();
    return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = uniform();
    double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v / rate;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

}  // namespace hetmed
