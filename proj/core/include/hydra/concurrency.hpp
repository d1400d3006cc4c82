#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>

namespace hydra {

/// Runs fn(0..n-1) on up to `max_workers` threads. Results must be written to
/// per-index slots by the caller so output order never depends on scheduling.
/// If any call throws, the exception from the lowest failing index is
/// rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t max_workers,
                  const std::function<void(std::size_t)>& fn);

/// Lock-free token bucket (GCRA form): one atomic holds the theoretical
/// arrival time of the next request. A rate of zero disables limiting.
class TokenBucket {
  public:
    TokenBucket(double requests_per_second, std::size_t burst);

    /// Blocks until a token is available.
    void acquire();

    /// Takes a token if one is available right now.
    bool try_acquire();

  private:
    using Clock = std::chrono::steady_clock;

    std::int64_t now_ns() const;

    std::int64_t interval_ns_;
    std::int64_t tolerance_ns_;
    std::atomic<std::int64_t> next_ns_;
    Clock::time_point epoch_;
};

}  // namespace hydra
