#pragma once

#include <cstddef>
#include <functional>

namespace tiad {

/// Worker count used by parallel_for; 1 runs inline.
int thread_count();
void set_thread_count(int n);

/// Runs body(i) for i in [0, n); calls from inside a worker run inline. Each
/// index writes only its own output slot,
/// so results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace tiad
