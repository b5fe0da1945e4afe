#include "sev/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace sev {

namespace {
std::atomic<int> g_num_threads{0};
}

void set_num_threads(int n) { g_num_threads.store(n < 0 ? 0 : n); }

int num_threads() {
  int n = g_num_threads.load();
  if (n == 0) {
    unsigned hc = std::thread::hardware_concurrency();
    n = hc == 0 ? 1 : static_cast<int>(hc);
  }
  return n;
}

void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& fn,
                  std::int64_t grain) {
  if (begin >= end) return;
  const std::int64_t total = end - begin;
  int workers = num_threads();
  if (workers > 1 && total / workers < grain)
    workers = static_cast<int>(std::max<std::int64_t>(1, total / grain));
  if (workers <= 1) {
    fn(begin, end);
    return;
  }
  const std::int64_t chunk = (total + workers - 1) / workers;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const std::int64_t lo = begin + w * chunk;
    if (lo >= end) break;
    const std::int64_t hi = std::min(end, lo + chunk);
    threads.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& t : threads) t.join();
}

}  // namespace sev
