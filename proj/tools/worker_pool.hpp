#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace endo::cli {

template <class R>
struct IndexedResults {
    std::vector<R> values;
    std::vector<std::exception_ptr> errors;
};

/**
 * @brief Runs task(i) for i in [0, n) on at most `jobs` threads.
 *
 * Results are stored by index, so output order never depends on scheduling. An exception thrown by
 * task(i) is kept in `errors[i]` and the remaining tasks still run.
 */
template <class R>
IndexedResults<R> run_indexed(std::size_t n, unsigned jobs, const std::function<R(std::size_t)>& task)
{
    IndexedResults<R> out;
    out.values.resize(n);
    out.errors.resize(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                out.values[i] = task(i);
            } catch (...) {
                out.errors[i] = std::current_exception();
            }
        }
    };
    const unsigned count = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
    if (count == 1) {
        worker();
        return out;
    }
    std::vector<std::thread> pool;
    pool.reserve(count);
    for (unsigned t = 0; t < count; ++t)
        pool.emplace_back(worker);
    for (auto& th : pool)
        th.join();
    return out;
}

}  // namespace endo::cli
