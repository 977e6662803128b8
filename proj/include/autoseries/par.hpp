#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace autoseries::par {

// Process-wide worker cap for the OpenMP kernels. 0 = use the OpenMP default.
void set_threads(int n);
int threads();

// Static-schedule parallel loop over [0, n). The body must only write to
// per-index slots; reductions are done by the caller over a filled buffer so
// results are identical for any thread count.
template <typename Body>
void parallel_for(std::size_t n, const Body& body) {
#ifdef _OPENMP
  const int nt = threads();
#pragma omp parallel for schedule(static) num_threads(nt > 0 ? nt : omp_get_max_threads())
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    body(static_cast<std::size_t>(i));
  }
#else
  for (std::size_t i = 0; i < n; ++i) body(i);
#endif
}

}  // namespace autoseries::par
