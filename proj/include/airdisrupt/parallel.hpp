#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace airdisrupt {

// Static-chunked parallel loop. Each index is processed exactly once and
// workers only write to their own output slots, so results are identical
// for every thread count. threads <= 1 runs inline.
template <typename Fn>
void parallel_for(size_t n, int threads, Fn&& fn) {
    if (n == 0) return;
    if (threads <= 1 || n == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    size_t workers = std::min<size_t>(size_t(threads), n);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    size_t chunk = (n + workers - 1) / workers;
    for (size_t w = 0; w < workers; ++w) {
        size_t lo = w * chunk;
        size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, w, lo, hi] {
            try {
                for (size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace airdisrupt
