#include "rsim/threading.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace rsim {

int thread_budget() {
    static const int budget = [] {
        int n = static_cast<int>(std::thread::hardware_concurrency());
        if (n < 1) n = 1;
        if (const char* env = std::getenv("RSIM_THREADS")) {
            try {
                const int cap = std::stoi(env);
                if (cap >= 1) n = std::min(n, cap);
            } catch (const std::exception&) {
                // unparsable value: ignore and keep the hardware count
            }
        }
        return n;
    }();
    return budget;
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
    if (n <= 0) return;
    const int budget = thread_budget();
    const int workers = static_cast<int>(std::min<std::int64_t>(budget, n));
    if (workers <= 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }

    const std::int64_t chunk = (n + workers - 1) / workers;
    std::exception_ptr first_error;
    std::mutex error_mu;
    auto run_range = [&](std::int64_t lo, std::int64_t hi) {
        try {
            for (std::int64_t i = lo; i < hi; ++i) fn(i);
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mu);
            if (!first_error) first_error = std::current_exception();
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers - 1));
    for (int t = 1; t < workers; ++t) {
        const std::int64_t lo = t * chunk;
        const std::int64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        threads.emplace_back(run_range, lo, hi);
    }
    run_range(0, std::min(n, chunk));
    for (auto& th : threads) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace rsim
