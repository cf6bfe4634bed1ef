#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace modgrad {

// Thread cap from MODGRAD_THREADS; defaults to 1 (fully serial) so results
// are reproducible unless the caller opts in.
inline unsigned thread_cap() {
  if (const char* env = std::getenv("MODGRAD_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(std::min<long>(v, 256));
  }
  return 1;
}

// Index-order deterministic parallel for: the work is partitioned by index,
// so any merge done per-index is identical regardless of thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const unsigned threads = std::min<unsigned>(thread_cap(), std::max<std::size_t>(n, 1));
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace modgrad
