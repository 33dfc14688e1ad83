// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace hairkit {

/// Resolves a thread-count request: 0 means "hardware default", anything
/// else is taken literally (clamped to at least 1).
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Runs fn(begin, end) over [0, count) split into contiguous blocks.
/// Blocks are fixed-size (independent of thread count), so any writes to
/// disjoint per-index outputs are bitwise reproducible across thread counts.
inline void parallel_for_blocks(std::int64_t count, int threads,
                                const std::function<void(std::int64_t, std::int64_t)>& fn,
                                std::int64_t block = 4096) {
    if (count <= 0) return;
    const int n_threads = resolve_threads(threads);
    if (n_threads <= 1 || count <= block) {
        fn(0, count);
        return;
    }
    std::vector<std::thread> pool;
    std::int64_t next = 0;
    std::vector<std::pair<std::int64_t, std::int64_t>> ranges;
    while (next < count) {
        const std::int64_t hi = std::min(count, next + block);
        ranges.emplace_back(next, hi);
        next = hi;
    }
    std::atomic<std::size_t> cursor{0};
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t idx = cursor.fetch_add(1);
                if (idx >= ranges.size()) break;
                fn(ranges[idx].first, ranges[idx].second);
            }
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace hairkit
