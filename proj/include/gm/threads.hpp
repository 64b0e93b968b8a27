#pragma once

#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include "gm/error.hpp"

namespace gm {

// Worker count for batch scoring. Every sample is processed independently
// with its own tape, so results are bitwise identical at any thread count;
// --deterministic still pins a single worker. GRAPHMAMBA_THREADS overrides
// the default of 1.
inline int resolve_threads(bool deterministic) {
  if (deterministic) return 1;
  const char* env = std::getenv("GRAPHMAMBA_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 1024)
    raise(ErrorKind::InvalidArgument,
          std::string("GRAPHMAMBA_THREADS must be an integer in [1, 1024], got \"") + env + "\"");
  return int(v);
}

// Split [0, n) into near-equal contiguous ranges and run fn(begin, end) on
// each, one range per worker. fn must only write state disjoint by index.
template <typename Fn>
void parallel_ranges(int64_t n, int threads, Fn&& fn) {
  if (n <= 0) return;
  int workers = int(std::min<int64_t>(threads, n));
  if (workers <= 1) {
    fn(int64_t(0), n);
    return;
  }
  std::vector<std::thread> pool;
  int64_t chunk = (n + workers - 1) / workers;
  for (int w = 1; w < workers; ++w) {
    int64_t b = int64_t(w) * chunk, e = std::min(n, b + chunk);
    if (b < e) pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(int64_t(0), std::min(n, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace gm
