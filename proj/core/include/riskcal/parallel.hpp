#pragma once

#include <cstddef>
#include <functional>

namespace riskcal {

// Worker count for threads <= 0: available parallelism.
int resolve_threads(int threads);

// Runs fn(i) for i in [0, n) on up to `threads` workers. The first
// exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace riskcal
