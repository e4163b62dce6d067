#include "roughmckv/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rmkv {

std::size_t thread_budget() {
    const char* raw = std::getenv("ROUGHMCKV_THREADS");
    if (raw == nullptr || *raw == '\0') {
        const std::size_t hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : hw;
    }
    char* end = nullptr;
    const unsigned long asked = std::strtoul(raw, &end, 10);
    if (end == raw || *end != '\0' || asked == 0) return 1;
    return asked;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const std::size_t budget = std::min(thread_budget(), n);
    if (budget <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::mutex gate;
    std::size_t bad_index = n;
    std::exception_ptr bad;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(gate);
                if (i < bad_index) {
                    bad_index = i;
                    bad = std::current_exception();
                }
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(budget - 1);
    for (std::size_t t = 0; t + 1 < budget; ++t) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();
    if (bad) std::rethrow_exception(bad);
}

}  // namespace rmkv
