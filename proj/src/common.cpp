#include "vta/common.hpp"

#include <cstdlib>

namespace vta {

int worker_count() {
    static const int n = [] {
        if (const char* env = std::getenv("VTA_THREADS")) {
            const int v = std::atoi(env);
            if (v >= 1) return std::min(v, 64);
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return static_cast<int>(std::clamp(hw, 1u, 16u));
    }();
    return n;
}

void parallel_for(int n, const std::function<void(int)>& fn) {
    const int workers = std::min(worker_count(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace vta
