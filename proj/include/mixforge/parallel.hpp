#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace mixforge {

/// Worker count for data-parallel loops: hardware concurrency by default,
/// capped by the MIXFORGE_THREADS environment variable. Results never depend
/// on this value; it only bounds parallelism.
inline unsigned worker_count() {
  if (const char* env = std::getenv("MIXFORGE_THREADS")) {
    try {
      const long requested = std::stol(env);
      if (requested >= 1) return static_cast<unsigned>(requested);
    } catch (...) {
      // unparsable value: fall through to the default
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs fn(i) for i in [0, n). Each index must touch only its own output
/// slot; the partition across threads is then free to vary without
/// affecting results.
template <typename F>
void parallel_for(std::size_t n, F&& fn) {
  if (n == 0) return;
  const unsigned workers = static_cast<unsigned>(
      std::min<std::size_t>(worker_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned t = 0; t < workers; ++t) {
    const std::size_t begin = static_cast<std::size_t>(t) * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace mixforge
