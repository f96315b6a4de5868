#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace endnet {

// Worker count: ENDNET_THREADS when set and positive, else the hardware
// concurrency (at least 1).
inline unsigned worker_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("ENDNET_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(std::min<long>(v, 1024));
        } catch (...) {
        }
    }
    return hw;
}

// Runs fn(i) for i in [0, n) over contiguous chunks. Each index is handled by
// exactly one worker, so per-index outputs are identical to a serial loop.
// The first exception thrown by any worker is rethrown.
template <typename Fn>
void parallel_for(long n, Fn&& fn) {
    const long workers = std::min<long>(worker_count(), std::max(1L, n / 64));
    if (workers <= 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    const long chunk = (n + workers - 1) / workers;
    for (long w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (long i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace endnet
