#include "kfe/parallel.hpp"

#include <atomic>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace kfe {

namespace {
std::atomic<int> g_threads{0};  // 0 = not yet resolved

int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}
}  // namespace

void init_threads() {
  int n = 0;
  if (const char* env = std::getenv("KFE_THREADS")) {
    n = std::atoi(env);
  }
  set_thread_count(n);
}

void set_thread_count(int n) {
  if (n <= 0) n = hardware_threads();
  g_threads.store(n, std::memory_order_relaxed);
}

int thread_count() {
  int n = g_threads.load(std::memory_order_relaxed);
  if (n <= 0) {
    n = hardware_threads();
    g_threads.store(n, std::memory_order_relaxed);
  }
  return n;
}

}  // namespace kfe
