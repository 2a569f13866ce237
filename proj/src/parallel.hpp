#ifndef PSLIB_SRC_PARALLEL_HPP
#define PSLIB_SRC_PARALLEL_HPP

#include <cstddef>
#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pslib/gaussian.hpp"

namespace pslib::detail {

inline int resolve_threads(int requested) {
#ifdef _OPENMP
    return requested > 0 ? requested : omp_get_max_threads();
#else
    (void)requested;
    return 1;
#endif
}

/// Runs body(i, counters) for i in [0, n). Iterations must not depend on each
/// other. Counters are kept per thread and merged afterwards; the first
/// exception thrown by any iteration is rethrown on the calling thread.
template <class Body>
void parallel_for(std::size_t n, int threads, NumericCounters& counters, Body&& body) {
    const int nt = resolve_threads(threads);
    std::vector<NumericCounters> local(static_cast<std::size_t>(nt));
    std::exception_ptr error;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nt)
#endif
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        int tid = 0;
#ifdef _OPENMP
        tid = omp_get_thread_num();
#endif
        try {
            body(static_cast<std::size_t>(i), local[static_cast<std::size_t>(tid)]);
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical(pslib_parallel_error)
#endif
            if (!error) error = std::current_exception();
        }
    }
    for (const auto& c : local) counters.merge(c);
    if (error) std::rethrow_exception(error);
}

}  // namespace pslib::detail

#endif
