#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace isocausal {

// Worker count: ISOCAUSAL_THREADS if set, else the hardware concurrency.
inline unsigned worker_count() {
    if (const char* env = std::getenv("ISOCAUSAL_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return static_cast<unsigned>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(begin, end, chunk) over contiguous chunks of [0, n). Chunk k always
// covers the same indices regardless of thread count, so callers can reduce
// per-chunk results in index order for deterministic output.
template <class Fn>
void parallel_chunks(std::size_t n, std::size_t chunks, Fn fn) {
    if (n == 0) return;
    chunks = std::max<std::size_t>(1, std::min(chunks, n));
    const std::size_t step = (n + chunks - 1) / chunks;
    const unsigned workers = std::min<unsigned>(worker_count(), static_cast<unsigned>(chunks));
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) fn(c * step, std::min(n, (c + 1) * step), c);
        return;
    }
    std::exception_ptr error;
    std::mutex m;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t c = w; c < chunks; c += workers) {
                try {
                    fn(c * step, std::min(n, (c + 1) * step), c);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(m);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace isocausal
