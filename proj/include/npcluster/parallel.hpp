#pragma once

#include <cstddef>
#include <functional>

namespace npcluster {

// Worker cap: NPCLUSTER_THREADS when set to a positive integer, otherwise
// the hardware concurrency (at least 1).
std::size_t default_thread_count();

// Runs body(begin, end) over contiguous chunks of [0, n) on up to `threads`
// workers. Chunk boundaries depend only on (n, threads). threads <= 1 runs
// inline on the caller.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace npcluster
