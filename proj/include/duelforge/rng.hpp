#pragma once

#include <cstdint>
#include <random>

namespace duelforge {

// Mixes a seed with a stream tag so independent consumers (envs, actors,
// samplers) get decorrelated streams from one experiment seed.
inline std::uint64_t deriveSeed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic RNG. mt19937_64 output is pinned by the standard; the
// uniform draws below avoid std distributions, whose results are
// implementation-defined and would break bitwise reproducibility.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

    std::uint64_t nextUint64() { return gen_(); }

    // Uniform integer in [0, n), n >= 1. Multiply-shift map; bias is
    // below 2^-32 for the small n used here.
    std::uint32_t uniformInt(std::uint32_t n) {
        const std::uint64_t x = gen_() >> 32;
        return static_cast<std::uint32_t>((x * static_cast<std::uint64_t>(n)) >> 32);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniformReal() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    // Uniform double in [lo, hi).
    double uniformReal(double lo, double hi) {
        return lo + (hi - lo) * uniformReal();
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace duelforge
