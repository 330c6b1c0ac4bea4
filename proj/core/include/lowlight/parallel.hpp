#pragma once

#include <cstddef>
#include <functional>

namespace lowlight {

// Worker cap from NL_LOWLIGHT_THREADS (unset or 0 means hardware concurrency).
std::size_t worker_count();

// Runs fn(i) for i in [0, n). Each index is executed exactly once; callers that
// reduce results must do so after the call, in index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace lowlight
