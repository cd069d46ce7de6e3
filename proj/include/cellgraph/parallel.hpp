#pragma once

#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace cellgraph {

// Runs f(i) for i in [0, count) on up to `jobs` threads and returns the
// results in index order, so the output never depends on the schedule.
// The first exception, if any, is rethrown after all workers joined.
template <typename F>
auto parallel_map(std::size_t count, int jobs, F f)
    -> std::vector<decltype(f(std::size_t{}))> {
    using R = decltype(f(std::size_t{}));
    std::vector<R> results(count);
    if (count == 0) return results;
    if (jobs < 1) jobs = 1;
    jobs = static_cast<int>(std::min<std::size_t>(jobs, count));

    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) results[i] = f(i);
        return results;
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(jobs));
    for (int w = 0; w < jobs; ++w) {
        workers.emplace_back([&, w]() {
            try {
                while (true) {
                    std::size_t i = next.fetch_add(1);
                    if (i >= count) break;
                    results[i] = f(i);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
                next.store(count);  // drain remaining work
            }
        });
    }
    for (auto& t : workers) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

}  // namespace cellgraph
