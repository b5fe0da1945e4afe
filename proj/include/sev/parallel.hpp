#pragma once

#include <cstdint>
#include <functional>

namespace sev {

// Global worker count used by parallel_for. 0 means "hardware concurrency".
// Results never depend on this value: work is only ever partitioned across
// disjoint output ranges and every element is accumulated sequentially by
// exactly one worker.
void set_num_threads(int n);
int num_threads();

// Runs fn(begin, end) on disjoint sub-ranges of [begin, end), possibly from
// several threads. Falls back to a single direct call for small ranges.
void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& fn,
                  std::int64_t grain = 1024);

}  // namespace sev
