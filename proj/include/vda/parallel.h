#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace vda {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? int(hw) : 1;
}

// Splits [0, n) into fixed-size chunks and runs fn(begin, end) for each,
// possibly on several threads. Chunk boundaries do not depend on the thread
// count, so workers writing disjoint per-index slots produce bitwise
// identical results at any parallelism level.
inline void parallel_chunks(size_t n, size_t chunk_size, int threads,
                            const std::function<void(size_t, size_t)>& fn) {
  if (n == 0) return;
  threads = resolve_threads(threads);
  const size_t n_chunks = (n + chunk_size - 1) / chunk_size;
  if (threads <= 1 || n_chunks <= 1) {
    for (size_t c = 0; c < n_chunks; ++c) {
      fn(c * chunk_size, std::min(n, (c + 1) * chunk_size));
    }
    return;
  }
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      fn(c * chunk_size, std::min(n, (c + 1) * chunk_size));
    }
  };
  std::vector<std::thread> pool;
  const int n_workers = std::min<size_t>(threads, n_chunks);
  pool.reserve(n_workers);
  for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

}  // namespace vda
