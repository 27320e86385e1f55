#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace hetmed {

/// Runs fn(i) for i in [0, n) across hardware threads. Each index writes
/// only its own output slot and draws from its own RNG substream, so the
/// result is identical whatever the thread count (including 1).
inline void parallel_for_index(std::size_t n,
                               const std::function<void(std::size_t)>& fn) {
  unsigned workers = std::thread::hardware_concurrency();
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  if (workers > n) workers = static_cast<unsigned>(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

/// Compensated (Kahan) accumulator so averaged tables do not depend on
/// summation noise.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - carry_;
    const double t = sum_ + y;
    carry_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

}  // namespace hetmed
