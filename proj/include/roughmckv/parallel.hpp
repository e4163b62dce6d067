#pragma once

#include <cstddef>
#include <functional>

namespace rmkv {

// Worker budget for data-parallel loops. ROUGHMCKV_THREADS sets the count
// (malformed or zero values mean one); unset, it defaults to the hardware
// concurrency. Results never depend on the budget: callers write into
// preassigned slots and reduce in index order.
std::size_t thread_budget();

// Runs body(0) .. body(n-1), split across at most thread_budget() threads.
// Iterations must be independent and write only to their own slots. If any
// iteration throws, the exception from the smallest failing index is
// rethrown after all workers finish, so failures are deterministic under
// any schedule.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace rmkv
