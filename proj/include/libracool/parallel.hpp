#pragma once

// Fixed job lists executed on a small thread pool. Results are stored by job
// index, so aggregation never depends on scheduling.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <optional>
#include <thread>
#include <type_traits>
#include <vector>

namespace libracool {

template <class T>
struct JobResult {
    std::optional<T> value;
    std::exception_ptr error;

    bool ok() const { return value.has_value(); }
    const T& get() const {
        if (error) {
            std::rethrow_exception(error);
        }
        return *value;
    }
};

/// Runs fn(0) ... fn(count - 1) on up to `threads` workers and keeps every
/// job's value or exception.
template <class F>
auto run_jobs(std::size_t count, std::size_t threads, F&& fn)
    -> std::vector<JobResult<std::invoke_result_t<F&, std::size_t>>> {
    using R = std::invoke_result_t<F&, std::size_t>;
    std::vector<JobResult<R>> results(count);
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                results[i].value.emplace(fn(i));
            } catch (...) {
                results[i].error = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
    if (n_threads == 1) {
        worker();
        return results;
    }
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back(worker);
    }
    pool.clear();
    return results;
}

/// Like run_jobs, but rethrows the first failure in job order.
template <class F>
auto run_jobs_or_throw(std::size_t count, std::size_t threads, F&& fn) {
    auto results = run_jobs(count, threads, std::forward<F>(fn));
    using R = typename decltype(results)::value_type;
    std::vector<std::remove_cvref_t<decltype(*std::declval<R>().value)>> out;
    out.reserve(results.size());
    for (auto& r : results) {
        out.push_back(r.get());
    }
    return out;
}

}  // namespace libracool
