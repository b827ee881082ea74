#pragma once

#include <cstddef>
#include <functional>

namespace cubitopo {

/// Worker count used when a caller passes 0: $CUBITOPO_THREADS if set to a
/// positive integer, else the hardware concurrency (at least 1).
std::size_t default_threads();

/// Runs task(i) for i in [0, n) on up to `threads` workers (0 = default).
/// Tasks must write only to their own output slot. The first exception thrown
/// by any task is rethrown after all workers have joined.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& task);

}  // namespace cubitopo
