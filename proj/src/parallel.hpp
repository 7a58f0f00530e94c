#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace risloc::detail {

inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, count). Outputs must be written to indexed slots;
// reductions then happen in index order, independent of scheduling.
inline void parallel_chunks(int count, int workers,
                            const std::function<void(int)>& fn) {
  if (count <= 0) return;
  const int n_threads = std::min(workers, count);
  if (n_threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int w = 0; w < n_threads; ++w) {
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace risloc::detail
