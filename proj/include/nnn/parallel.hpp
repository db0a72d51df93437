#pragma once

#include <cstddef>
#include <functional>

namespace nnn {

/// Worker count from NNN_THREADS, else the hardware concurrency. Always >= 1.
int thread_count();

/// Calls fn(i) for every i in [0, n), spreading indices over at most
/// thread_count() workers. fn must only write to storage owned by index i.
/// The first exception thrown by any call is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace nnn
