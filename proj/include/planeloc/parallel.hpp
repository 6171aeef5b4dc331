#pragma once

#include <cstddef>
#include <functional>

namespace planeloc {

/// PLANELOC_THREADS if set to a positive integer, else hardware concurrency.
std::size_t default_thread_count();

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = default).
/// Indices are handed out in order; the first exception is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace planeloc
