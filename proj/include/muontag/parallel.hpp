// Minimal static work distribution over std::thread.
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace muontag {

/*!
 * Run fn(i) for i in [0, n) on up to `workers` threads.
 *
 * Tasks are claimed in increasing index order. The first exception thrown by
 * any task is rethrown on the calling thread after all workers stop.
 */
template<class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn)
{
    workers = std::max(1u, workers);
    if (workers == 1 || n <= 1)
    {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        while (!failed.load())
        {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try
            {
                fn(i);
            }
            catch (...)
            {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed = true;
            }
        }
    };
    std::vector<std::thread> pool;
    unsigned count = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    for (unsigned w = 0; w < count; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace muontag
