#pragma once

#include <cstdint>
#include <functional>

namespace bppo {

// Runs fn(0..n-1) across up to `workers` threads. Work is what it is: callers
// must write results into index-addressed slots so the outcome is identical
// for every worker count. Exceptions are rethrown for the lowest failing
// index. workers <= 1 runs inline.
void parallel_for(int64_t n, int64_t workers, const std::function<void(int64_t)>& fn);

// workers <= 0 resolves to the hardware concurrency (at least 1).
int64_t resolve_workers(int64_t requested);

}  // namespace bppo
