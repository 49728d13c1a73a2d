#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace mfgmm {

/// Explicit request wins; otherwise MFGMM_THREADS; otherwise 1.
[[nodiscard]] inline int resolve_threads(int requested) {
  if (requested > 0)
    return requested;
  if (const char *env = std::getenv("MFGMM_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0)
        return n;
    } catch (const std::exception &) {
    }
  }
  return 1;
}

/// Runs f(i) for i in [0, n). Work items must write to disjoint slots so the
/// result does not depend on the thread count. The first exception thrown by
/// any item is rethrown on the calling thread.
template <typename F> void parallel_for(int n, int threads, F &&f) {
  const int t = std::min(resolve_threads(threads), std::max(n, 1));
  if (t <= 1) {
    for (int i = 0; i < n; ++i)
      f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err)
          err = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int k = 0; k < t; ++k)
    pool.emplace_back(worker);
  for (auto &th : pool)
    th.join();
  if (err)
    std::rethrow_exception(err);
}

} // namespace mfgmm
