#ifndef CRACKSCAN_PARALLEL_HPP
#define CRACKSCAN_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace crackscan {

/// Global cap on worker threads used by the data-parallel loops. 0 = hardware.
inline int& thread_cap() {
    static int cap = 0;
    return cap;
}

inline int effective_threads() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    int cap = thread_cap();
    return cap > 0 ? std::min(cap, hw) : hw;
}

/// Runs fn(i) for i in [0, n). Each index is claimed exactly once; outputs of
/// different indices must be disjoint.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const int nthreads = std::min<std::size_t>(effective_threads(), n ? n : 1);
    if (nthreads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
                fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace crackscan

#endif
