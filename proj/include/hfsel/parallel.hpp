#pragma once

#include <cstddef>
#include <functional>

namespace hfsel {

// Number of workers used by every parallel loop in the library. Defaults to
// HFSEL_THREADS when set, else std::thread::hardware_concurrency().
std::size_t thread_count();
void set_thread_count(std::size_t n);

// Runs body(i) for i in [0, n). Work items write to disjoint outputs, so the
// result never depends on the worker count. If any body throws, the exception
// from the smallest failing index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace hfsel
