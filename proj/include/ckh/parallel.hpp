#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <future>
#include <thread>
#include <vector>

namespace ckh {

/// Runs fn(i) for i in [0, count) on up to hardware_concurrency threads.
/// Callers write results into slot i, so reductions afterwards happen in index
/// order whatever the scheduling was. The first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min(count, hw);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> pending;
    pending.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pending.push_back(std::async(std::launch::async, [&] {
            for (std::size_t i = next++; i < count; i = next++) fn(i);
        }));
    }
    for (auto& f : pending) f.wait();
    for (auto& f : pending) f.get();
}

}  // namespace ckh
