#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

namespace rrl {

namespace detail {
inline std::atomic<int>& thread_count_slot() {
  static std::atomic<int> count{0};  // 0 = use hardware concurrency
  return count;
}
}  // namespace detail

inline void set_thread_count(int n) { detail::thread_count_slot().store(n < 1 ? 1 : n); }

inline int thread_count() {
  int n = detail::thread_count_slot().load();
  if (n > 0) return n;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(i) for i in [0, n). Work is split into contiguous ranges, one per
/// worker; every invocation writes only to slots derived from its own i, so
/// results are identical for any thread count.
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn, std::int64_t min_grain = 256) {
  int workers = thread_count();
  if (workers <= 1 || n < 2 * min_grain) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  if (static_cast<std::int64_t>(workers) > n / min_grain) {
    workers = static_cast<int>(n / min_grain);
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const std::int64_t chunk = (n + workers - 1) / workers;
  for (int t = 0; t < workers; ++t) {
    const std::int64_t lo = t * chunk;
    const std::int64_t hi = std::min<std::int64_t>(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace rrl
