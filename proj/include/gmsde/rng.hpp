#pragma once

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <cstdint>

namespace gmsde {

/// SplitMix64 output finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, counter). Streams are independent keys (one per Monte Carlo
/// path); counters index draws within a stream. There is no mutable state, so
/// any increment can be recomputed in isolation and in any order.
class CounterRng {
public:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

    constexpr CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_(mix64(mix64(seed + kGolden) ^ (stream * kGolden + 0x632be59bd9b4e019ull))) {}

    constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
        return mix64(key_ ^ mix64((counter + 1) * kGolden));
    }

    /// Uniform in the open interval (0, 1).
    double uniform(std::uint64_t counter) const noexcept {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal by inversion of the uniform draw.
    double gaussian(std::uint64_t counter) const { return standard_normal_quantile(uniform(counter)); }

    static double standard_normal_quantile(double u) {
        return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
    }

private:
    std::uint64_t key_;
};

/// Sequential convenience wrapper over CounterRng for non-hot-path sampling
/// (surface samples, random test points).
class SequentialRng {
public:
    SequentialRng(std::uint64_t seed, std::uint64_t stream) noexcept : rng_(seed, stream) {}

    double uniform() noexcept { return rng_.uniform(next_++); }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    double gaussian() { return rng_.gaussian(next_++); }

private:
    CounterRng rng_;
    std::uint64_t next_ = 0;
};

} // namespace gmsde
