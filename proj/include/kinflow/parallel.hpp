#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace kinflow {

/// Worker count used by parallel_for. Resolution order: explicit
/// set_num_threads(), the KINFLOW_THREADS environment variable, hardware
/// concurrency. Results of all library operations are required to be
/// bit-identical for any positive value.
inline std::size_t& thread_count_override() {
    static std::size_t count = 0;  // 0 = not set
    return count;
}

inline void set_num_threads(std::size_t n) { thread_count_override() = n; }

inline std::size_t num_threads() {
    if (thread_count_override() > 0) return thread_count_override();
    if (const char* env = std::getenv("KINFLOW_THREADS")) {
        const long v = std::atol(env);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

/// Runs body(i) for i in [begin, end) over contiguous chunks. Each index is
/// processed exactly once and writes only to its own slots, so the result
/// does not depend on the worker count. Reductions must be done by the
/// caller in index order afterwards.
template <typename Body>
void parallel_for(std::size_t begin, std::size_t end, Body&& body) {
    const std::size_t n = end > begin ? end - begin : 0;
    if (n == 0) return;
    const std::size_t workers = std::min(num_threads(), n);
    if (workers <= 1) {
        for (std::size_t i = begin; i < end; ++i) body(i);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = begin + w * chunk;
        const std::size_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace kinflow
