#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace bsdelab {

// Threefry-2x64, 20 rounds. Counter-based: the output is a pure function of
// (key, counter), so any (seed, shard, path, step) addressing scheme is
// reproducible under arbitrary parallel schedules.
namespace detail {

inline constexpr std::uint64_t kSkeinParity = 0x1BD11BDAA9FC1A22ull;
inline constexpr int kThreefryRotations[8] = {16, 42, 12, 31, 16, 32, 24, 21};

inline std::uint64_t rotl64(std::uint64_t x, int r) noexcept {
    return (x << r) | (x >> (64 - r));
}

} // namespace detail

inline std::array<std::uint64_t, 2> threefry2x64(std::uint64_t k0, std::uint64_t k1,
                                                 std::uint64_t c0, std::uint64_t c1) noexcept {
    const std::uint64_t ks[3] = {k0, k1, detail::kSkeinParity ^ k0 ^ k1};
    std::uint64_t x0 = c0 + ks[0];
    std::uint64_t x1 = c1 + ks[1];
    for (int round = 0; round < 20; ++round) {
        x0 += x1;
        x1 = detail::rotl64(x1, detail::kThreefryRotations[round % 8]);
        x1 ^= x0;
        if (round % 4 == 3) {
            const int s = round / 4 + 1; // subkey injection index 1..5
            x0 += ks[s % 3];
            x1 += ks[(s + 1) % 3] + static_cast<std::uint64_t>(s);
        }
    }
    return {x0, x1};
}

/// Map 64 random bits to (0, 1]: never 0, so safe under log().
inline double uniform_open01(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

/// Map 64 random bits to [0, 1).
inline double uniform_halfopen01(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// One standard normal from one counter slot (Box-Muller, cosine branch).
inline double standard_normal(std::uint64_t k0, std::uint64_t k1,
                              std::uint64_t c0, std::uint64_t c1) noexcept {
    const auto r = threefry2x64(k0, k1, c0, c1);
    const double u1 = uniform_open01(r[0]);
    const double u2 = uniform_halfopen01(r[1]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Sequential sampler over a counter stream; for sweeps and audits where a
/// stateful draw order is convenient but reproducibility must be kept.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : k0_(seed), k1_(stream) {}

    double uniform01() noexcept { return uniform_halfopen01(next()); } // [0,1)
    double uniform(double a, double b) noexcept { return a + (b - a) * uniform01(); }

    double normal() noexcept {
        const auto r = threefry2x64(k0_, k1_, counter_++, 0);
        const double u1 = uniform_open01(r[0]);
        const double u2 = uniform_halfopen01(r[1]);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Heavy-tailed (Cauchy) draw; scale sets the interquartile spread.
    double cauchy(double scale) noexcept {
        double u = uniform01();
        if (u <= 0.0) u = 0.5; // tan pole guard
        return scale * std::tan(std::numbers::pi * (u - 0.5));
    }

    std::uint64_t next_u64() noexcept { return next(); }

private:
    std::uint64_t next() noexcept { return threefry2x64(k0_, k1_, counter_++, 0)[0]; }

    std::uint64_t k0_;
    std::uint64_t k1_;
    std::uint64_t counter_ = 0;
};

} // namespace bsdelab
