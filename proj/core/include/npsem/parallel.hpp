#pragma once

#include <cstddef>
#include <functional>

namespace npsem {

/// Global worker count used by parallel_for (CLI --threads). Defaults to the
/// hardware concurrency. Results never depend on this value: every parallel
/// loop writes to disjoint, index-addressed slots.
void set_thread_count(int n);
int thread_count();

/// Runs fn(i) for i in [0, n) with static chunking over the worker pool.
/// fn must only write to state owned by index i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace npsem
