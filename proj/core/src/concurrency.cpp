#include "hydra/concurrency.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace hydra {

void parallel_for(std::size_t n, std::size_t max_workers,
                  const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::clamp<std::size_t>(max_workers, 1, std::max<std::size_t>(n, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::size_t error_index = n;
    std::exception_ptr error;

    auto work = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers - 1);
        for (std::size_t w = 1; w < workers; ++w) {
            pool.emplace_back(work);
        }
        work();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

TokenBucket::TokenBucket(double requests_per_second, std::size_t burst)
    : interval_ns_(requests_per_second > 0.0
                       ? static_cast<std::int64_t>(1e9 / requests_per_second)
                       : 0),
      tolerance_ns_(interval_ns_ * static_cast<std::int64_t>(burst > 0 ? burst - 1 : 0)),
      next_ns_(0),
      epoch_(Clock::now()) {}

std::int64_t TokenBucket::now_ns() const {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - epoch_).count();
}

bool TokenBucket::try_acquire() {
    if (interval_ns_ == 0) {
        return true;
    }
    const std::int64_t now = now_ns();
    std::int64_t tat = next_ns_.load(std::memory_order_relaxed);
    for (;;) {
        const std::int64_t base = std::max(tat, now);
        if (base - tolerance_ns_ > now) {
            return false;
        }
        if (next_ns_.compare_exchange_weak(tat, base + interval_ns_, std::memory_order_acq_rel)) {
            return true;
        }
    }
}

void TokenBucket::acquire() {
    while (!try_acquire()) {
        std::this_thread::sleep_for(std::chrono::nanoseconds(std::max<std::int64_t>(interval_ns_ / 4, 1000)));
    }
}

}  // namespace hydra
