#include "gridseg/common.hpp"

#include <algorithm>
#include <thread>
#include <vector>

namespace gridseg {

void parallel_for(std::int64_t n, int threads,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  threads = std::max(1, threads);
  const std::int64_t chunks = std::min<std::int64_t>(threads, n);
  if (chunks == 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(chunks));
  const std::int64_t step = (n + chunks - 1) / chunks;
  for (std::int64_t c = 0; c < chunks; ++c) {
    const std::int64_t lo = c * step;
    const std::int64_t hi = std::min(n, lo + step);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t state) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    state ^= p[i];
    state *= 1099511628211ULL;
  }
  return state;
}

}  // namespace gridseg
