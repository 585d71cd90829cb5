#pragma once

#include <cstddef>
#include <functional>

namespace kelvinlab {

/// Default worker count: hardware concurrency, at least 1.
int default_workers();

/// Runs fn(i) for i in [0, n) on `workers` threads using a static block
/// partition. The first exception (lowest index) is rethrown after all
/// workers finish.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace kelvinlab
