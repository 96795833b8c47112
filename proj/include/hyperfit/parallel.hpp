#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace hyperfit {

/// Worker count: explicit request wins, then HYPERFIT_THREADS, then hardware.
inline int thread_count(int requested = 0)
{
    if (requested > 0) return requested;
    if (const char* env = std::getenv("HYPERFIT_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Static block partition of [0, n). Each index is processed exactly once;
// results must be written to disjoint slots so the outcome is independent
// of scheduling.
inline void parallel_for(int n, int n_threads, const std::function<void(int)>& body)
{
    n_threads = std::min(std::max(n_threads, 1), n);
    if (n <= 0) return;
    if (n_threads <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    const int chunk = (n + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
        const int lo = t * chunk;
        const int hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (int i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace hyperfit
