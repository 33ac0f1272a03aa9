#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace continuum {

namespace detail {
inline std::atomic<std::size_t>& worker_setting() {
    static std::atomic<std::size_t> workers{0};
    return workers;
}
} // namespace detail

/// Worker count used by the parallel maps. Reads CONTINUUM_WORKERS the first
/// time when nothing was set explicitly; falls back to the hardware count.
inline std::size_t default_workers() {
    std::size_t n = detail::worker_setting().load();
    if (n != 0) return n;
    if (const char* env = std::getenv("CONTINUUM_WORKERS")) {
        const long parsed = std::strtol(env, nullptr, 10);
        if (parsed > 0) return static_cast<std::size_t>(parsed);
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

inline void set_default_workers(std::size_t workers) { detail::worker_setting().store(workers); }

/// Calls body(i) for every i in [0, n). Each index is handled exactly once;
/// callers write results into per-index slots so the outcome never depends on
/// the number of workers. The first exception thrown by any body is rethrown.
template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t workers = 0) {
    if (workers == 0) workers = default_workers();
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                cursor.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace continuum
