#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace parps {

// Run work(0..items-1) on up to `threads` workers. Callers make the work
// items independent (own seeds, own output slots), so scheduling order
// never affects results.
inline void run_items(int items, int threads, const std::function<void(int)>& work) {
  if (threads <= 1 || items <= 1) {
    for (int i = 0; i < items; ++i) work(i);
    return;
  }
  std::atomic<int> cursor{0};
  std::vector<std::thread> pool;
  const int workers = std::min(threads, items);
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = cursor.fetch_add(1);
        if (i >= items) return;
        work(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace parps
