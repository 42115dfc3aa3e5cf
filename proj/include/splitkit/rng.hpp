#pragma once

#include <cstdint>

namespace splitkit {

/// Counter-based generator: draw k is a pure function of (seed, k), so a
/// solver state can be saved and resumed mid-stream.
/// The mixing function is the SplitMix64 finalizer.
class CounterRng {
public:
    CounterRng() = default;
    explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

    std::uint64_t next_u64() noexcept { return mix(seed_ + (++counter_) * 0x9E3779B97F4A7C15ull); }

    /// Uniform integer in [0, n) by rejection, n >= 1.
    std::uint64_t uniform_index(std::uint64_t n) noexcept
    {
        const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    /// Uniform double in [0, 1).
    double uniform01() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    friend bool operator==(const CounterRng&, const CounterRng&) = default;

private:
    static std::uint64_t mix(std::uint64_t z) noexcept
    {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_ = 0;
    std::uint64_t counter_ = 0;
};

} // namespace splitkit
