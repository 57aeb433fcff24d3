#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace collamamba {

namespace detail {
inline std::atomic<int>& thread_count_ref() {
  static std::atomic<int> n{1};
  return n;
}
}  // namespace detail

/// Number of worker threads used by the parallel paths (default 1).
inline int num_threads() { return detail::thread_count_ref().load(); }
inline void set_num_threads(int n) { detail::thread_count_ref().store(std::max(1, n)); }

/// Splits [begin, end) into contiguous chunks, one per worker, and calls
/// fn(lo, hi) on each. Callers must write disjoint outputs per index so the
/// result does not depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t begin, std::size_t end, Fn&& fn) {
  const std::size_t n = end > begin ? end - begin : 0;
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(num_threads()), n);
  if (workers <= 1) {
    if (n) fn(begin, end);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 1; w < workers; ++w) {
      const std::size_t lo = begin + w * chunk;
      const std::size_t hi = std::min(end, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, w, lo, hi] {
        try {
          fn(lo, hi);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    try {
      fn(begin, std::min(end, begin + chunk));
    } catch (...) {
      errors[0] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace collamamba
