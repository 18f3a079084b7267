#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace mud {

namespace detail {
inline int& max_threads_slot() {
    static int slot = 0;
    return slot;
}
}  // namespace detail

/// Process-wide cap on worker threads. 0 restores hardware concurrency.
inline void set_max_threads(int n) { detail::max_threads_slot() = n; }

inline int max_threads() {
    int n = detail::max_threads_slot();
    if (n > 0) return n;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(begin, end) over [0, n) split into contiguous chunks, one per
/// worker. Chunk boundaries depend only on n and the worker count, so any
/// writer that owns its indices stays deterministic.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, int threads = 0) {
    if (n == 0) return;
    int t = threads > 0 ? threads : max_threads();
    t = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(t), n));
    if (t <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(t));
    const std::size_t chunk = (n + static_cast<std::size_t>(t) - 1) / static_cast<std::size_t>(t);
    for (int i = 0; i < t; ++i) {
        const std::size_t begin = static_cast<std::size_t>(i) * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        workers.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& w : workers) w.join();
}

}  // namespace mud
