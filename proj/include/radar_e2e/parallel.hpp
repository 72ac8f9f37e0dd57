#pragma once

#include <cstddef>
#include <functional>

namespace radar_e2e {

/// Calls fn(block) for block in [0, n_blocks) on up to `workers` threads.
/// Callers write per-block results into preallocated slots and reduce in
/// block order, so output never depends on the worker count.
void parallel_for_blocks(std::size_t n_blocks, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace radar_e2e
