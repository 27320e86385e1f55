#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace hetmed {

/// Counter-based deterministic generator (splitmix64 output function).
/// Every consumer derives its own stream from (seed, label, indices), so
/// replicate b of any randomized procedure sees the same draws no matter
/// how work is scheduled across threads. Cheap to construct, which is what
/// makes per-(replicate, grid-point) substreams affordable in the SIMEX
/// and bootstrap inner loops.
class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : key_(mix(seed ^ kInit)), state_(key_) {}

  /// A statistically independent stream keyed by a label and up to three
  /// indices. Children derive from the construction key, not the draw
  /// position, so forking is unaffected by how much the parent has
  /// consumed.
  Rng fork(std::string_view label, std::uint64_t a = 0, std::uint64_t b = 0,
           std::uint64_t c = 0) const;

  /// Label-free index fork for per-draw substreams in hot loops; fork a
  /// labelled root once, then key children by indices only.
  Rng fork_idx(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    std::uint64_t key = mix(key_ ^ mix(a));
    key = mix(key ^ mix(b ^ 0x6A09E667F3BCC909ull));
    key = mix(key ^ mix(c ^ 0xBB67AE8584CAA73Bull));
    return Rng(key, key);
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  /// Uniform on the open interval (0,1); never returns an endpoint.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal by inverse-CDF transform (one uniform per draw).
  double normal();

  /// Gamma(shape, rate) by the Marsaglia-Tsang rejection method.
  double gamma(double shape, double rate);

  /// +1 or -1 with equal probability.
  double rademacher() { return (next_u64() >> 63) ? 1.0 : -1.0; }

  /// Uniform integer in [0, n), n >= 1 (Lemire multiply-shift).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// In-place Fisher-Yates shuffle of an index-like span.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      T tmp = items[i - 1];
      items[i - 1] = items[j];
      items[j] = tmp;
    }
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kInit = 0x5BF0'3635'0C5A'1F1Dull;

  Rng(std::uint64_t key, std::uint64_t state) : key_(key), state_(state) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += kGamma;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t state_;
};

}  // namespace hetmed
