#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ninn {

/// Runs body(i) for i in [0, count) on up to `jobs` threads. Work items are
/// independent and write to their own slots, so results do not depend on the
/// thread count. The first exception thrown is rethrown after all workers join.
template <typename Body>
void parallel_for(std::size_t count, int jobs, Body&& body) {
    const auto workers = static_cast<std::size_t>(std::max(1, jobs));
    if (workers == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, count); ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace ninn
