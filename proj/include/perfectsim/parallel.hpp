#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace perfectsim {

/// Worker count used by the parallel loops (OpenMP threads).
int worker_count();
void set_worker_count(int n);

/// Runs f(i) for i in [0, n), in parallel when `parallel` is set. Exceptions
/// are captured per index and the one with the smallest index is rethrown,
/// so failures do not depend on scheduling.
template <class F>
void parallel_for(std::size_t n, F&& f, bool parallel = true) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic) if (parallel && n > 1)
  for (long long i = 0; i < count; ++i) {
    try {
      f(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace perfectsim
