#pragma once

#include <cstdint>
#include <random>

namespace bevdg {

// mt19937_64 with hand-rolled value conversions. The engine's output sequence
// is fixed by the standard; the std:: distributions are not, so every draw
// goes through these helpers to keep results bitwise reproducible across
// toolchains (golden hashes and same-seed checks depend on it).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0,1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo,hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0,n). Rejection-sampled, unbiased.
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0) return 0;
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    int uniform_int(int lo, int hi) { // inclusive bounds
        return lo + static_cast<int>(uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
    }

private:
    std::mt19937_64 engine_;
};

// Stable stream derivation so parallel or reordered consumers draw from
// pre-assigned sequences. SplitMix64-style mix of the parts.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

} // namespace bevdg
