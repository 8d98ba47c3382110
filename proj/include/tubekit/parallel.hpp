#pragma once

#include <cstddef>
#include <functional>

namespace tubekit {

/// Runs fn(i) for every i in [0, n) on up to `threads` workers. The first
/// exception thrown by any call is rethrown after all workers finish.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace tubekit
