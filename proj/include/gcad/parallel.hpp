#pragma once

#include <cstddef>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace gcad {

/// Runs f(i) for i in [0, n) across `workers` threads with a static block
/// partition. Results must be written to per-index slots by the caller, which
/// makes the outcome independent of scheduling. If several indices throw, the
/// exception from the lowest index is rethrown.
template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& f) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    const std::size_t w = std::min(workers, n);
    std::vector<std::exception_ptr> errors(w);
    std::vector<std::size_t> error_index(w, n);
    std::vector<std::thread> threads;
    threads.reserve(w);
    for (std::size_t t = 0; t < w; ++t) {
        const std::size_t lo = n * t / w;
        const std::size_t hi = n * (t + 1) / w;
        threads.emplace_back([&, t, lo, hi]() {
            for (std::size_t i = lo; i < hi; ++i) {
                try {
                    f(i);
                } catch (...) {
                    errors[t] = std::current_exception();
                    error_index[t] = i;
                    return;
                }
            }
        });
    }
    for (auto& th : threads) th.join();
    std::size_t first = n;
    std::size_t who = w;
    for (std::size_t t = 0; t < w; ++t) {
        if (errors[t] && error_index[t] < first) {
            first = error_index[t];
            who = t;
        }
    }
    if (who < w) std::rethrow_exception(errors[who]);
}

/// Worker-count resolution: explicit value wins, then the GCAD_WORKERS
/// environment variable, then 1 (serial).
inline std::size_t resolve_workers(std::size_t requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("GCAD_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    return 1;
}

}  // namespace gcad
