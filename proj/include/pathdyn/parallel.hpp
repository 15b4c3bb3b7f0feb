#pragma once

#include <cstddef>
#include <cstdint>

namespace pathdyn {

/// Number of OpenMP workers used by the data-parallel loops. 0 restores the
/// OpenMP default.
void set_worker_count(int workers);
int worker_count();

/// Runs body(i) for i in [0, n) across the configured workers. Iterations
/// must be independent; results may not depend on scheduling.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 16) num_threads(worker_count())
  for (std::int64_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
}

}  // namespace pathdyn
