#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <stdexcept>

#include "hydra/concurrency.hpp"
#include "hydra/error.hpp"

namespace hydra {
namespace {

TEST(ParallelFor, VisitsEveryIndexOnce) {
    for (std::size_t workers : {1U, 3U, 16U}) {
        std::vector<std::atomic<int>> hits(257);
        parallel_for(hits.size(), workers, [&](std::size_t i) { hits[i].fetch_add(1); });
        for (const auto& h : hits) {
            EXPECT_EQ(h.load(), 1);
        }
    }
    parallel_for(0, 4, [](std::size_t) { FAIL(); });
}

TEST(ParallelFor, PropagatesExceptions) {
    EXPECT_THROW(parallel_for(50, 4,
                              [](std::size_t i) {
                                  if (i == 17) {
                                      throw DataError("boom");
                                  }
                              }),
                 DataError);
}

TEST(TokenBucket, ZeroRateNeverBlocks) {
    TokenBucket bucket(0.0, 1);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_TRUE(bucket.try_acquire());
    }
}

TEST(TokenBucket, EnforcesRateAfterBurst) {
    TokenBucket bucket(200.0, 2);
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < 12; ++i) {
        bucket.acquire();
    }
    const auto elapsed = std::chrono::steady_clock::now() - start;
    // 12 tokens with a burst of 2 need at least 10 intervals of 5 ms.
    EXPECT_GE(elapsed, std::chrono::milliseconds(45));
}

}  // namespace
}  // namespace hydra
