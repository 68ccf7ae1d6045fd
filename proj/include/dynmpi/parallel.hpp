#ifndef DYNMPI_PARALLEL_HPP
#define DYNMPI_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace dynmpi {

// Static range partitioning over worker threads. Bodies must write to disjoint
// storage; then the result is independent of the thread count.
inline void parallel_for_chunks(std::size_t n,
                                const std::function<void(std::size_t, std::size_t)>& body,
                                int threads_hint = 0) {
  if (n == 0) return;
  std::size_t n_threads = threads_hint > 0
                              ? static_cast<std::size_t>(threads_hint)
                              : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  n_threads = std::min(n_threads, n);
  if (n_threads <= 1) {
    body(0, n);
    return;
  }
  const std::size_t chunk = (n + n_threads - 1) / n_threads;
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&, t, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                         int threads_hint = 0) {
  parallel_for_chunks(
      n,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) body(i);
      },
      threads_hint);
}

}  // namespace dynmpi

#endif
