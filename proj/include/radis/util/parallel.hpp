#pragma once

#include <cstddef>
#include <functional>

namespace radis {

// Worker count: RADIS_LAB_THREADS if set, else hardware concurrency.
size_t worker_count();

// Runs fn(i) for i in [0, n) across up to worker_count() threads. The work
// partition is the caller's concern; callers that reduce must do so in index
// order afterwards so results do not depend on the thread count.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

}  // namespace radis
