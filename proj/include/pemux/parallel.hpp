#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pemux {

// Global worker budget for the OpenMP kernels. All parallel kernels in this
// project assign each output element (or each per-sample buffer) to exactly
// one thread and keep every floating-point reduction in a fixed serial
// order, so results are bit-identical at any thread count.
inline void set_max_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace pemux
