#include "jkpanel/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace jkpanel {

std::size_t resolve_workers(std::size_t workers) {
    if (workers != 0) return workers;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

std::vector<std::exception_ptr> parallel_for_collect(std::size_t n, std::size_t workers,
                                                     const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> errors(n);
    const std::size_t threads = std::min(resolve_workers(workers), n);
    std::atomic<std::size_t> next{0};
    auto body = [&]() {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads <= 1) {
        body();
        return errors;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    return errors;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    for (const auto& e : parallel_for_collect(n, workers, fn))
        if (e) std::rethrow_exception(e);
}

}  // namespace jkpanel
