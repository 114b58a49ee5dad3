#pragma once

#include <functional>

namespace tvstarma {

/// Worker count: TVSTARMA_THREADS when set to a positive integer, else the hardware concurrency.
int thread_count();

/**
 * Runs body(0..count-1) on up to `threads` workers (0 = thread_count()).
 *
 * Indices are claimed dynamically. If bodies throw, the exception of the
 * lowest failing index is rethrown after all workers have stopped.
 */
void parallel_for(int count, const std::function<void(int)>& body, int threads = 0);

}  // namespace tvstarma
