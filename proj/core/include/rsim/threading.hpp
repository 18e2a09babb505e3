#pragma once

#include <cstdint>
#include <functional>

namespace rsim {

// Worker-thread budget: hardware concurrency, capped by the RSIM_THREADS
// environment variable when set to a positive integer. Always at least 1.
int thread_budget();

// Runs fn(i) for every i in [0, n), splitting the index range into one
// contiguous chunk per worker. Falls back to the calling thread when the
// budget is 1 or there is too little work to split. fn must write only to
// disjoint per-index state; results must not depend on the thread count.
// The first exception thrown by any chunk is rethrown after all join.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

} // namespace rsim
