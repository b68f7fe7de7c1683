#pragma once

#include <cstddef>
#include <functional>

namespace minsurro {

/// Worker cap from MINSURRO_THREADS (0 or unset = hardware concurrency).
std::size_t thread_budget();

/// Runs fn(i) for i in [0, n). Work is spread over up to thread_budget()
/// threads; calls made from inside a worker run serially so nested loops do
/// not oversubscribe. Callers reduce results in index order, which keeps
/// outputs independent of the schedule.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  bool enabled = true);

} // namespace minsurro
