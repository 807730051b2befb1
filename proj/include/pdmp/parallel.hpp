#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pdmp
{

// Worker count from PDMP_ERGO_WORKERS, else hardware concurrency (at least 1).
unsigned default_workers();

// Resolves 0 to default_workers().
inline unsigned resolve_workers(unsigned workers)
{
    return workers == 0 ? default_workers() : workers;
}

/*!
 * Run body(i) for i in [0, n) on a small worker pool.
 *
 * Tasks are claimed in fixed-size chunks from an atomic counter. Callers must
 * write results by index and reduce them in index order afterwards; that keeps
 * every output independent of the worker count. The first exception thrown by
 * any task is rethrown on the calling thread.
 */
template<class Body>
void parallel_for(std::size_t n, unsigned workers, Body&& body)
{
    workers = resolve_workers(workers);
    if (workers <= 1 || n < 2)
    {
        for (std::size_t i = 0; i < n; ++i)
        {
            body(i);
        }
        return;
    }

    constexpr std::size_t chunk = 64;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto run = [&] {
        for (;;)
        {
            if (failed.load(std::memory_order_relaxed))
            {
                return;
            }
            const std::size_t begin = next.fetch_add(chunk);
            if (begin >= n)
            {
                return;
            }
            const std::size_t end = std::min(n, begin + chunk);
            try
            {
                for (std::size_t i = begin; i < end; ++i)
                {
                    body(i);
                }
            }
            catch (...)
            {
                std::lock_guard lock(error_mutex);
                if (!error)
                {
                    error = std::current_exception();
                }
                failed = true;
                return;
            }
        }
    };

    const unsigned spawned = static_cast<unsigned>(
        std::min<std::size_t>(workers, (n + chunk - 1) / chunk));
    std::vector<std::thread> pool;
    pool.reserve(spawned > 0 ? spawned - 1 : 0);
    for (unsigned w = 1; w < spawned; ++w)
    {
        pool.emplace_back(run);
    }
    run();
    for (auto& th : pool)
    {
        th.join();
    }
    if (error)
    {
        std::rethrow_exception(error);
    }
}

}  // namespace pdmp
