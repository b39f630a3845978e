#pragma once

#include <cstdint>

namespace sucd {

// Stateless counter-mode mixing. All randomness in the library is derived by
// hashing (seed, stream, counter) tuples so that any draw can be recomputed
// in O(1) at query time.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t mix64(uint64_t seed, uint64_t stream) {
    return mix64(mix64(seed) ^ 0x6a09e667f3bcc909ull ^ stream);
}

inline uint64_t mix64(uint64_t seed, uint64_t stream, uint64_t counter) {
    return mix64(mix64(seed, stream) + 0x3c6ef372fe94f82bull * counter);
}

// Unbiased-enough modular draw; the bias for bound << 2^64 is below 2^-40
// and irrelevant for every statistical test in this project.
inline uint64_t draw_below(uint64_t bits, uint64_t bound) {
    using u128 = unsigned __int128;
    return static_cast<uint64_t>((u128(bits) * bound) >> 64);
}

// Small sequential generator for tests and Monte-Carlo trials.
class Rng {
  public:
    explicit Rng(uint64_t seed, uint64_t stream = 0) : seed_(seed), stream_(stream) {}

    uint64_t next() { return mix64(seed_, stream_, counter_++); }
    uint64_t next_below(uint64_t bound) { return draw_below(next(), bound); }
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  private:
    uint64_t seed_;
    uint64_t stream_;
    uint64_t counter_ = 0;
};

}  // namespace sucd
