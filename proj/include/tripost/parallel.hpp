#pragma once

#include <cstddef>
#include <exception>
#include <optional>
#include <type_traits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tripost {

// Reference path: index order, one thread.
template <typename F>
auto serial_map(std::size_t n, F&& f) -> std::vector<std::invoke_result_t<F&, std::size_t>> {
    std::vector<std::invoke_result_t<F&, std::size_t>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(f(i));
    }
    return out;
}

// Same contract as serial_map; items are computed concurrently and stored
// by index so output order never depends on scheduling. The first
// exception (by index) is rethrown after the loop.
template <typename F>
auto parallel_map(std::size_t n, F&& f, int threads = 0)
    -> std::vector<std::invoke_result_t<F&, std::size_t>> {
    using R = std::invoke_result_t<F&, std::size_t>;
#ifdef _OPENMP
    if (threads == 1 || n < 2) {
        return serial_map(n, f);
    }
    std::vector<std::optional<R>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    const int nthreads = threads > 0 ? threads : omp_get_max_threads();
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 8) num_threads(nthreads)
    for (long long i = 0; i < count; ++i) {
        try {
            slots[static_cast<std::size_t>(i)].emplace(f(static_cast<std::size_t>(i)));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::vector<R> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
#else
    (void)threads;
    return serial_map(n, f);
#endif
}

inline int available_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace tripost
