#pragma once

#include <cstdint>
#include <random>

namespace examforge::expr {

/// Seeded stream behind every sampling builtin. The engine is the standard
/// mt19937_64; the transforms on top are spelled out here rather than taken
/// from <random> distributions, whose output is implementation-defined, so a
/// seed reproduces the same draws with any standard library.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed = 0) : engine_(seed) {}

    void reseed(std::uint64_t seed) { engine_.seed(seed); }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer on [lo, hi], both inclusive. Requires lo <= hi.
    std::int64_t integer(std::int64_t lo, std::int64_t hi);

    /// Box-Muller; one normal per call, the paired draw is discarded.
    double normal(double mean, double sd);

private:
    std::mt19937_64 engine_;
};

/// splitmix64 finalizer, used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace examforge::expr
