#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace hydra {

/// 64-bit FNV-1a. Stable across platforms and runs, unlike std::hash.
[[nodiscard]] std::uint64_t fnv1a64(std::string_view bytes,
                                    std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

/// SplitMix64 finalizer; a good bijective mixer for combining hashes.
[[nodiscard]] std::uint64_t mix64(std::uint64_t x) noexcept;

[[nodiscard]] inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) noexcept {
    return mix64(a ^ (mix64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

/// Derives an independent phase seed from the master seed and a label, so
/// each pipeline phase is reproducible on its own.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept;

/// Maps 64 random bits onto [0, 1) with 53 bits of precision.
[[nodiscard]] inline double unit_interval(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Seeded generator with distribution helpers whose output does not depend on
/// the standard library implementation.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform01() { return unit_interval(engine_()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Unbiased integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace hydra
