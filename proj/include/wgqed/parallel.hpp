#pragma once

#include <cstddef>
#include <functional>

namespace wgqed {

// Worker count: WGQED_THREADS if set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t thread_count();

// Runs body(i) for i in [0, n). Each index writes only its own slot, so
// callers get results independent of scheduling. If any call throws, the
// exception from the lowest failing index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace wgqed
