#pragma once

#include <cstddef>
#include <functional>

namespace flowbench {

/// Sets the worker count of the process-wide pool (1 = fully serial).
void set_thread_count(int n);
int thread_count();

/// Runs fn(i) for i in [0, n). Work is split into contiguous chunks, one
/// per worker; every element is computed by exactly one thread with no
/// cross-element reductions, so results do not depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t begin, std::size_t end)>& fn);

}  // namespace flowbench
