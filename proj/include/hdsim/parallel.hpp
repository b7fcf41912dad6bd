#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hdsim {

inline int hardware_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

/// Thread count used by the parallel loops. The LAPACK backend always runs
/// single-threaded; see eigh().
inline void set_threads(int n) {
  n = std::max(1, n);
#ifdef _OPENMP
  omp_set_num_threads(n);
#endif
}

inline int threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// Resolves the thread count: explicit request, then HDSIM_THREADS, then cores.
inline int resolve_threads(int requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("HDSIM_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return hardware_threads();
}

}  // namespace hdsim
