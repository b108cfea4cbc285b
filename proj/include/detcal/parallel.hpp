#pragma once

#include <cstddef>
#include <functional>

namespace detcal {

/// Worker count: DETCAL_THREADS when set (clamped to >= 1), otherwise the
/// hardware concurrency.
int worker_thread_count();

/// Runs fn(i) for i in [0, n). Work items must write only to their own output
/// slot; chunking is fixed so results are identical for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace detcal
