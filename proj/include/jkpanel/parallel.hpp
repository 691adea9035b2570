#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <vector>

namespace jkpanel {

// Runs fn(i) for i in [0, n) on up to `workers` threads (0 means one per
// hardware thread). Every index is attempted; afterwards the exception from
// the lowest failing index, if any, is rethrown, so the observable outcome
// does not depend on scheduling. fn must only write to index-owned state.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

// Same, but failures are collected per index instead of rethrown.
std::vector<std::exception_ptr> parallel_for_collect(std::size_t n, std::size_t workers,
                                                     const std::function<void(std::size_t)>& fn);

std::size_t resolve_workers(std::size_t workers);

}  // namespace jkpanel
