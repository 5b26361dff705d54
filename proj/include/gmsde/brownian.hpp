#pragma once

#include "gmsde/rng.hpp"
#include "gmsde/types.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace gmsde {

/// Brownian increments of one path on the dyadic ladder of step sizes
/// T 2^-k, k = 0..finest_level. The finest level is drawn from the counter
/// RNG keyed by (seed, path); every coarser level is obtained by summing
/// pairs of increments from the level below, so all levels are driven by the
/// same Brownian path.
class BrownianLadder {
public:
    BrownianLadder(double horizon, int finest_level, int noise_dim, std::uint64_t seed, std::uint64_t path)
        : horizon_(horizon), finest_(finest_level), noise_dim_(noise_dim), seed_(seed), path_(path) {
        if (finest_level < 0 || finest_level > 30)
            throw Error(ErrorCode::invalid_argument, "finest level must be in [0, 30]");
        if (noise_dim < 1) throw Error(ErrorCode::invalid_argument, "noise dimension must be positive");
        if (!(horizon > 0.0)) throw Error(ErrorCode::invalid_argument, "horizon must be positive");
        levels_.resize(static_cast<std::size_t>(finest_level) + 1);

        const CounterRng rng(seed, path);
        auto& fine = levels_[finest_level];
        const std::size_t n = steps(finest_level) * static_cast<std::size_t>(noise_dim);
        fine.resize(n);
        const double scale = std::sqrt(step_size(finest_level));
        for (std::size_t i = 0; i < n; ++i) fine[i] = scale * rng.gaussian(i);

        for (int k = finest_level - 1; k >= 0; --k) {
            const auto& below = levels_[k + 1];
            auto& here = levels_[k];
            here.resize(steps(k) * static_cast<std::size_t>(noise_dim));
            for (std::size_t s = 0; s < steps(k); ++s)
                for (int j = 0; j < noise_dim; ++j)
                    here[s * noise_dim + j] = below[(2 * s) * noise_dim + j] + below[(2 * s + 1) * noise_dim + j];
        }
    }

    double horizon() const noexcept { return horizon_; }
    int finest_level() const noexcept { return finest_; }
    int noise_dim() const noexcept { return noise_dim_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t path() const noexcept { return path_; }

    static std::size_t steps(int level) noexcept { return std::size_t{1} << level; }
    double step_size(int level) const noexcept { return std::ldexp(horizon_, -level); }

    /// Increments of `level`, step-major: entry [s * m + j] is the j-th
    /// coordinate of the s-th increment.
    std::span<const double> increments(int level) const {
        if (level < 0 || level > finest_)
            throw Error(ErrorCode::invalid_argument, "level outside the ladder");
        return levels_[level];
    }

    /// The s-th increment of `level` as a vector.
    Vector increment(int level, std::size_t s) const {
        const auto inc = increments(level);
        Vector dw(noise_dim_);
        for (int j = 0; j < noise_dim_; ++j) dw(j) = inc[s * noise_dim_ + j];
        return dw;
    }

private:
    double horizon_;
    int finest_;
    int noise_dim_;
    std::uint64_t seed_;
    std::uint64_t path_;
    std::vector<std::vector<double>> levels_;
};

} // namespace gmsde
