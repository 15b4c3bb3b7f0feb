#include "pathdyn/parallel.hpp"

#include <omp.h>

#include <atomic>

namespace pathdyn {

namespace {
std::atomic<int> g_workers{0};
}

void set_worker_count(int workers) { g_workers.store(workers < 0 ? 0 : workers); }

int worker_count() {
  const int w = g_workers.load();
  return w > 0 ? w : omp_get_max_threads();
}

}  // namespace pathdyn
