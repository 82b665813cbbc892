#pragma once

// Static-partition parallel loop. Each index is visited exactly once and
// results are written to index-owned slots, so output never depends on the
// thread count. The thread count comes from AKCURV_THREADS (default: hardware
// concurrency).

#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace akcurv {

inline unsigned thread_count() {
  if (const char* env = std::getenv("AKCURV_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// body(begin, end, worker) processes indices [begin, end).
template <class Body>
void parallel_chunks(std::size_t count, Body&& body) {
  const unsigned workers = count < 256 ? 1 : thread_count();
  if (workers <= 1) {
    body(std::size_t{0}, count, 0u);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const std::size_t chunk = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = begin + chunk < count ? begin + chunk : count;
    if (begin >= end) break;
    pool.emplace_back([&, begin, end, w] {
      try {
        body(begin, end, w);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace akcurv
