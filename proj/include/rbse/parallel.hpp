#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace rbse {

// Contiguous-chunk parallel loop over independent items. Results that depend
// only on per-item writes are identical for every thread count.
template <typename F>
void parallel_for(std::size_t n, int threads, F&& fn) {
  if (threads < 2 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t t = std::min(std::size_t(threads), n);
  const std::size_t chunk = (n + t - 1) / t;
  auto run = [&fn](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) fn(i);
  };
  std::vector<std::thread> pool;
  pool.reserve(t - 1);
  for (std::size_t w = 1; w < t; ++w)
    pool.emplace_back(run, std::min(w * chunk, n), std::min((w + 1) * chunk, n));
  run(0, std::min(chunk, n));
  for (auto& th : pool) th.join();
}

}  // namespace rbse
