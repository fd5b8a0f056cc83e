#pragma once

// Minimal static-partition worker pool. Every index is handled by exactly one
// call of the body, so results never depend on how many threads ran.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rdepth {

namespace detail {
inline std::atomic<std::size_t>& thread_setting() {
  static std::atomic<std::size_t> value{0};
  return value;
}
inline bool& inside_worker() {
  thread_local bool flag = false;
  return flag;
}
}  // namespace detail

/// Caps the worker pool; 0 restores the default (available parallelism).
inline void set_thread_count(std::size_t k) { detail::thread_setting() = k; }

inline std::size_t thread_count() {
  std::size_t k = detail::thread_setting();
  if (k == 0) k = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  return k;
}

/// Calls body(i) for i in [0, n). Nested calls run inline on the calling worker.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers = std::min(thread_count(), n);
  if (workers <= 1 || detail::inside_worker()) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }

  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run_block = [&](std::size_t w) {
    detail::inside_worker() = true;
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    try {
      for (std::size_t i = begin; i < end; ++i) body(i);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
    detail::inside_worker() = false;
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run_block, w);
  run_block(0);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace rdepth
