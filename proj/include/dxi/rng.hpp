#pragma once

// Counter-keyed random streams.
//
// Every random stage in the toolkit draws from a stream identified by
// (seed, stream index). A replicate, imputation or simulated cohort always
// uses the stream with its own index, so results never depend on how work is
// split across threads.
//
// Stream derivation:
//   key   = mix64(mix64(seed) ^ mix64(stream + 0x9E3779B97F4A7C15))
//   state = four successive SplitMix64 outputs starting from key
// where mix64 is the SplitMix64 finalizer. The generator is xoshiro256**.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace dxi {

constexpr std::uint64_t kDefaultSeed = 42;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Seed for a named sub-stage of an analysis (e.g. one bootstrap among several
// run from the same user seed).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
    return mix64(seed ^ mix64(tag + 0xD1B54A32D192ED03ULL));
}

class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t state) noexcept : state_(state) {}
    constexpr std::uint64_t next() noexcept {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix64(state_);
    }

private:
    std::uint64_t state_;
};

// xoshiro256** satisfying UniformRandomBitGenerator.
class Stream {
public:
    using result_type = std::uint64_t;

    constexpr Stream(std::uint64_t seed, std::uint64_t stream) noexcept {
        const std::uint64_t key = mix64(mix64(seed) ^ mix64(stream + 0x9E3779B97F4A7C15ULL));
        SplitMix64 sm(key);
        for (auto& word : s_) word = sm.next();
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0, 1) with 53 random bits.
    constexpr double uniform() noexcept {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    constexpr bool bernoulli(double p) noexcept { return uniform() < p; }

    // Unbiased integer in [0, bound) (Lemire's multiply-shift with rejection).
    constexpr std::uint32_t bounded(std::uint32_t bound) noexcept {
        std::uint64_t x = (*this)() >> 32;
        std::uint64_t m = x * bound;
        auto low = static_cast<std::uint32_t>(m);
        if (low < bound) {
            const std::uint32_t threshold = static_cast<std::uint32_t>(-bound) % bound;
            while (low < threshold) {
                x = (*this)() >> 32;
                m = x * bound;
                low = static_cast<std::uint32_t>(m);
            }
        }
        return static_cast<std::uint32_t>(m >> 32);
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> s_{};
};

// Standard normal deviate by the Marsaglia polar method (second value of
// each pair discarded). Spelled out rather than std::normal_distribution so
// simulated data are identical across standard libraries.
inline double standard_normal(Stream& rng) {
    double u = 0.0, v = 0.0, s = 0.0;
    do {
        u = 2.0 * rng.uniform() - 1.0;
        v = 2.0 * rng.uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return u * std::sqrt(-2.0 * std::log(s) / s);
}

}  // namespace dxi
