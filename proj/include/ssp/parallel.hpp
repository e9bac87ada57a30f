#pragma once

#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ssp {

// Thread cap shared by all parallel kernels. Resolution order:
//   STRUCT_SPARSE_THREADS env var > OpenMP default.
// A cap of 1 selects the serial code path everywhere.
inline int thread_limit() {
  static int cached = [] {
    if (const char* env = std::getenv("STRUCT_SPARSE_THREADS")) {
      int v = std::atoi(env);
      if (v >= 1) return v;
    }
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
  }();
  return cached;
}

inline bool parallel_enabled() { return thread_limit() > 1; }

}  // namespace ssp
