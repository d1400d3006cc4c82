#include "hydra/random.hpp"

#include <limits>

namespace hydra {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) noexcept {
    std::uint64_t h = basis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept {
    return hash_combine(mix64(master), fnv1a64(label));
}

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection sampling on the top of the range keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) {
        x = engine_();
    }
    return x % n;
}

}  // namespace hydra
