#include "minsurro/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace minsurro {

namespace {
thread_local bool in_worker = false;

#if defined(__GLIBC__)
// Tape evaluation allocates and frees many mid-sized matrices per step; the
// default thresholds return that memory to the kernel each time.
const bool allocator_tuned = [] {
    mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
    return true;
}();
#endif
} // namespace

std::size_t thread_budget() {
    std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const char* env = std::getenv("MINSURRO_THREADS");
    if (env == nullptr || *env == '\0') return hw;
    try {
        long v = std::stol(env);
        if (v <= 0) return hw;
        return static_cast<std::size_t>(v);
    } catch (...) {
        return hw;
    }
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, bool enabled) {
    std::size_t workers = std::min(thread_budget(), n);
    if (!enabled || in_worker || workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto body = [&] {
        in_worker = true;
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
        in_worker = false;
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    // lowest failing index wins so the reported error does not depend on timing
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace minsurro
