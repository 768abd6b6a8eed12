#pragma once

#include <cstddef>
#include <functional>

namespace benford {

/// Number of logical processors, at least 1.
std::size_t default_jobs();

/// Calls fn(i) for every i in [0, count) on up to `jobs` threads.
///
/// Work is handed out dynamically, so callers must write results into slots
/// owned by index i; that keeps the output independent of scheduling. The
/// exception thrown for the lowest index is rethrown after all workers join.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace benford
