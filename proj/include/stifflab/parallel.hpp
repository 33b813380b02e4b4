#pragma once

#include <cstddef>
#include <functional>

namespace stifflab {

/// Worker count: `requested` if positive, else STIFFLAB_THREADS, else the
/// hardware concurrency (at least 1).
unsigned resolve_threads(int requested = 0);

/// Runs body(i) for i in [0, n) on `threads` workers pulling indices from a
/// shared counter. The first exception thrown by any body is rethrown after
/// all workers stop.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

} // namespace stifflab
