#pragma once

#include <functional>

namespace hodge5 {

/// Worker count for internal loops; 0 restores the default (H5_THREADS, then 1).
void set_thread_count(int threads);
int thread_count();

/// Runs body(i) for i in [0, n). Each index is handled exactly once and
/// results must be written to per-index slots, so output never depends on
/// scheduling.
void parallel_for(int n, const std::function<void(int)>& body);

} // namespace hodge5
