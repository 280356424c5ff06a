#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace def {

// Fixed-size-chunk parallel loop. Chunk boundaries depend only on n_items
// and chunk_size, never on the worker count, so per-chunk partial results
// can be reduced in chunk order to give results independent of parallelism.
inline long chunk_count(long n_items, long chunk_size) {
    return (n_items + chunk_size - 1) / chunk_size;
}

inline void parallel_chunks(long n_items, long chunk_size, int workers,
                            const std::function<void(long chunk_idx, long begin, long end)>& fn) {
    const long chunks = chunk_count(n_items, chunk_size);
    auto run_chunk = [&](long c) {
        const long begin = c * chunk_size;
        const long end = std::min(n_items, begin + chunk_size);
        fn(c, begin, end);
    };
    if (workers <= 1 || chunks <= 1) {
        for (long c = 0; c < chunks; ++c) run_chunk(c);
        return;
    }
    std::atomic<long> next{0};
    std::vector<std::thread> pool;
    const int n_threads = static_cast<int>(std::min<long>(workers, chunks));
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            for (long c = next.fetch_add(1); c < chunks; c = next.fetch_add(1)) run_chunk(c);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace def
