#pragma once

#include <cstdint>

namespace turbokv {

// SplitMix64. This is the engine's one PRNG: 64-bit, counter-based, and
// fully specified in docs/formats.md so "seed 42" produces the same byte
// stream in any implementation language. Output i is mix64(seed + (i+1)*PHI).
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += kPhi);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1): top 53 bits scaled by 2^-53. Exact in binary64.
    double next_double() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // Uniform in [-1, 1).
    double next_signed() { return 2.0 * next_double() - 1.0; }

    // Uniform integer in [0, n). Modulo bias is irrelevant at desk scale.
    uint64_t next_below(uint64_t n) { return next() % n; }

    // i-th output of the stream for `seed`, without advancing any state.
    static uint64_t at(uint64_t seed, uint64_t index) {
        uint64_t z = seed + (index + 1) * kPhi;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    static constexpr uint64_t kPhi = 0x9E3779B97F4A7C15ULL;
    uint64_t state_;
};

// FNV-1a 64-bit, used for content ids and fingerprints.
class Fnv1a64 {
public:
    Fnv1a64& update(const void* bytes, size_t n) {
        const unsigned char* p = static_cast<const unsigned char*>(bytes);
        for (size_t i = 0; i < n; ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001B3ULL;
        }
        return *this;
    }

    Fnv1a64& update_u32(uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
        return update(b, 4);
    }

    Fnv1a64& update_u64(uint64_t v) {
        update_u32(static_cast<uint32_t>(v));
        return update_u32(static_cast<uint32_t>(v >> 32));
    }

    Fnv1a64& update_f64(double v) {
        uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        __builtin_memcpy(&bits, &v, sizeof(bits));
        return update_u64(bits);
    }

    uint64_t digest() const { return h_; }

private:
    uint64_t h_ = 0xCBF29CE484222325ULL;
};

} // namespace turbokv
