#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace msda {

/// Runs body(i) for i in [0, count) on up to `threads` workers. Tasks
/// must write only to their own output slots; results are then
/// independent of the worker count. Exceptions are rethrown in the
/// caller.
template <class F>
void parallel_for(std::size_t count, unsigned threads, F&& body) {
    if (threads == 0) threads = 1;
    if (threads == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned t = 0; t < workers; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < count; i += workers) body(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);
}

} // namespace msda
