#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dreamer {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work is claimed from a
// shared counter; callers write results by index so output order never
// depends on scheduling. The first exception thrown is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> threads;
  const std::size_t count = std::min(jobs, n);
  threads.reserve(count - 1);
  for (std::size_t t = 1; t < count; ++t) threads.emplace_back(worker);
  worker();
  threads.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace dreamer
