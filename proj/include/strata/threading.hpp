#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace strata {

/// Worker thread cap: STRATA_THREADS when set, otherwise all cores.
inline std::size_t worker_count() {
  if (const char* env = std::getenv("STRATA_THREADS")) {
    const long n = std::atol(env);
    if (n >= 1) return static_cast<std::size_t>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs independent jobs on up to worker_count() threads. Each job owns its
/// outputs, so results do not depend on the thread count.
inline void run_jobs(std::vector<std::function<void()>> jobs) {
  const std::size_t workers = std::min(worker_count(), jobs.size());
  if (workers <= 1) {
    for (auto& job : jobs) job();
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        jobs[i]();
      }
    });
  for (auto& t : pool) t.join();
}

} // namespace strata
