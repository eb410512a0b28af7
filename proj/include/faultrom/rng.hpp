#pragma once

#include <cstdint>
#include <string_view>

namespace faultrom::rng {

/// splitmix64 finalizer.
constexpr std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// 64-bit FNV-1a of a byte string; stable across platforms and runs.
constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ull;
    return h;
}

/// Counter-based draw: the same (seed, stream, index) always gives the same bits.
constexpr std::uint64_t bits(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return mix(mix(mix(seed) ^ stream) ^ index);
}

/// Uniform in [0, 1) with 53 random bits.
constexpr double uniform01(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return static_cast<double>(bits(seed, stream, index) >> 11) * 0x1.0p-53;
}

/// Sequential generator for shuffles and weight initialization.
class Stream {
public:
    explicit Stream(std::uint64_t seed, std::uint64_t stream = 0) : seed_(mix(seed) ^ mix(stream + 1)) {}
    std::uint64_t next() { return mix(seed_ + 0x9e3779b97f4a7c15ull * ++count_); }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        for (;;) {
            const std::uint64_t x = next();
            if (x < limit) return x % n;
        }
    }
    template <typename It>
    void shuffle(It first, It last) {
        for (auto n = last - first; n > 1; --n) std::swap(first[n - 1], first[static_cast<long>(below(n))]);
    }

private:
    std::uint64_t seed_;
    std::uint64_t count_ = 0;
};

}  // namespace faultrom::rng
