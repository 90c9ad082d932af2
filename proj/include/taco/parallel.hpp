#pragma once

#include <cstddef>
#include <functional>

namespace taco {

/// Worker count used when a caller passes 0: $TACO_THREADS if set, else
/// std::thread::hardware_concurrency().
std::size_t default_thread_count();

/// Runs body(begin, end) over contiguous chunks of [0, count). Chunks are
/// disjoint, so bodies that only write their own range are race-free.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace taco
