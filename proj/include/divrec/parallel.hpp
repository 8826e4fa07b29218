#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace divrec {

// Runs fn(i) for i in [0, n). Each index is processed exactly once, by any
// thread; results must be written into index-addressed slots so the outcome
// does not depend on scheduling. threads <= 1 runs inline.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::atomic<std::size_t> next{0};
    // Chunked grab to cut contention on fine-grained work.
    const std::size_t chunk = std::max<std::size_t>(1, n / (workers * 16));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t begin = next.fetch_add(chunk);
                if (begin >= n) return;
                const std::size_t end = std::min(n, begin + chunk);
                for (std::size_t i = begin; i < end; ++i) fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

int default_threads();

}  // namespace divrec
