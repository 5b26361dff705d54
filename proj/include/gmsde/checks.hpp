#pragma once

#include "gmsde/geometry.hpp"
#include "gmsde/rng.hpp"
#include "gmsde/sde.hpp"
#include "gmsde/transform.hpp"
#include "gmsde/transformed_sde.hpp"
#include "gmsde/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace gmsde {

// Sampled checks of the standing assumptions. None of them throw on a
// violated assumption; the reports carry the verdict.

struct NonParallelityReport {
    double min_norm = std::numeric_limits<double>::infinity();
    double threshold = 0.0;
    std::size_t samples = 0;
    bool pass = false;
};

/// min over sampled surface points of |sigma(xi)^T n(xi)| against c0.
inline NonParallelityReport check_non_parallelity(const SdeProblem& problem, std::size_t samples = 512,
                                                  std::uint64_t seed = 23) {
    NonParallelityReport r;
    r.threshold = problem.nonparallel_tol;
    for (const Vector& xi : problem.surface.sample(samples, seed, problem.box_lo, problem.box_hi)) {
        const Vector n = problem.surface.tube_coordinates(xi).normal;
        r.min_norm = std::min(r.min_norm, (problem.diffusion(xi).transpose() * n).norm());
        ++r.samples;
    }
    r.pass = r.samples > 0 && r.min_norm >= r.threshold;
    return r;
}

struct LipschitzReport {
    double minus_side = 0.0;
    double plus_side = 0.0;
    std::size_t pairs = 0;
};

namespace detail {

inline Vector uniform_in_box(SequentialRng& rng, const Vector& lo, const Vector& hi) {
    Vector x(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i) x(i) = rng.uniform(lo(i), hi(i));
    return x;
}

} // namespace detail

/// Per-side Lipschitz estimates of the drift branches from same-side sample
/// pairs in the problem's box. Advisory.
inline LipschitzReport check_drift_piecewise_lipschitz(const SdeProblem& problem, std::size_t pairs = 4096,
                                                       std::uint64_t seed = 29) {
    LipschitzReport r;
    SequentialRng rng(seed, 1);
    for (std::size_t k = 0; k < pairs; ++k) {
        const Vector x = detail::uniform_in_box(rng, problem.box_lo, problem.box_hi);
        const Vector y = detail::uniform_in_box(rng, problem.box_lo, problem.box_hi);
        const Side s = problem.side(x);
        if (problem.side(y) != s) continue;
        const double dist = (x - y).norm();
        if (!(dist > 0.0)) continue;
        const double ratio = (problem.drift_branch(x, s) - problem.drift_branch(y, s)).norm() / dist;
        double& slot = s == Side::plus ? r.plus_side : r.minus_side;
        slot = std::max(slot, ratio);
        ++r.pairs;
    }
    return r;
}

/// Sampled Lipschitz constant of a matrix field over the box.
template <typename Field>
double sampled_lipschitz(Field&& field, const Vector& lo, const Vector& hi, std::size_t pairs, std::uint64_t seed) {
    SequentialRng rng(seed, 2);
    double best = 0.0;
    for (std::size_t k = 0; k < pairs; ++k) {
        const Vector x = detail::uniform_in_box(rng, lo, hi);
        const Vector y = detail::uniform_in_box(rng, lo, hi);
        const double dist = (x - y).norm();
        if (!(dist > 0.0)) continue;
        best = std::max(best, (field(x) - field(y)).norm() / dist);
    }
    return best;
}

inline double check_sigma_lipschitz(const SdeProblem& problem, std::size_t pairs = 10000, std::uint64_t seed = 31) {
    return sampled_lipschitz([&](const Vector& x) { return problem.diffusion(x); }, problem.box_lo, problem.box_hi,
                             pairs, seed);
}

struct AdmissibilityReport {
    CBound bound;
    double c = 0.0;
    bool within_reach = false;
    bool within_geometric = false;
    bool within_coefficient = false;
    double min_det = std::numeric_limits<double>::infinity();
    std::size_t tube_samples = 0;
    /// Hard verdict: the tube is inside the reach, c respects the geometric
    /// term, and det G' > 0 at every sampled tube point. Exceeding only the
    /// (sufficient) coefficient term is a warning.
    bool pass = false;
    std::vector<std::string> warnings;
};

inline AdmissibilityReport check_admissibility(const SdeProblem& problem, double c,
                                               const TransformOptions& options = {}, std::size_t samples = 256,
                                               std::uint64_t seed = 37) {
    AdmissibilityReport r;
    r.c = c;
    r.bound = c_bound(problem, options, samples);
    const double slack = 1.0 + 1e-9;
    r.within_reach = c <= problem.surface.reach() * slack;
    r.within_geometric = c <= r.bound.geometric_term * slack;
    r.within_coefficient = c < r.bound.coefficient_term;
    if (!r.within_coefficient)
        r.warnings.push_back("c = " + std::to_string(c) + " exceeds the jump-coefficient bound " +
                             std::to_string(r.bound.coefficient_term));
    if (!r.within_reach || !r.within_geometric) return r;

    auto shared = std::make_shared<const SdeProblem>(problem);
    const Transform transform(shared, c, options);
    SequentialRng rng(seed, 3);
    const auto points = problem.surface.sample(samples, seed, problem.box_lo, problem.box_hi);
    for (const Vector& xi : points) {
        const Vector n = problem.surface.tube_coordinates(xi).normal;
        for (int k = 0; k < 4; ++k) {
            const Vector x = xi + rng.uniform(-1.0, 1.0) * c * (1.0 - 1e-9) * n;
            r.min_det = std::min(r.min_det, transform.jacobian(x).determinant());
            ++r.tube_samples;
        }
    }
    r.pass = r.min_det > 0.0;
    return r;
}

struct ContinuityReport {
    struct Probe {
        Vector xi;
        double jump = 0.0;
        std::array<double, 3> transformed_gap{};
        std::array<double, 3> raw_gap{};
        std::array<double, 2> ratio{};
        bool pass = true;
    };
    std::array<double, 3> offsets{};
    std::vector<Probe> probes;
    bool pass = true;
};

/// Offsets used by the continuity probe: 1e-2, 1e-3, 1e-4, scaled by
/// (c / 0.5)^2 when c < 0.5. The transformed drift gap is linear in h only
/// once h is small against c^2 (the bump's curvature adds a term of order
/// h^2 / c^2), so the probe scale follows c^2.
inline std::array<double, 3> continuity_offsets(double c) {
    const double scale = std::min(1.0, (c / 0.5) * (c / 0.5));
    return {1e-2 * scale, 1e-3 * scale, 1e-4 * scale};
}

/// At sampled surface points, compares |mu~(G(xi + h n)) - mu~(G(xi - h n))|
/// (must shrink linearly in h: consecutive ratios in [5, 20]) with the raw
/// drift gap |mu(xi + h n) - mu(xi - h n)| (must stay at the jump size).
inline ContinuityReport check_transformed_drift_continuity(const TransformedSde& sde,
                                                           const std::array<double, 3>& offsets,
                                                           std::size_t samples = 32, std::uint64_t seed = 41) {
    const auto& problem = sde.problem();
    const auto& transform = sde.transform();
    ContinuityReport r;
    r.offsets = offsets;
    for (const Vector& xi : problem.surface.sample(samples, seed, problem.box_lo, problem.box_hi)) {
        const TubePoint tp = problem.surface.tube_coordinates(xi);
        ContinuityReport::Probe probe;
        probe.xi = tp.foot;
        probe.jump = (problem.drift_branch(tp.foot, Side::plus) - problem.drift_branch(tp.foot, Side::minus)).norm();
        for (std::size_t j = 0; j < 3; ++j) {
            const double h = r.offsets[j];
            const Vector xp = tp.foot + h * tp.normal;
            const Vector xm = tp.foot - h * tp.normal;
            probe.transformed_gap[j] = (sde.drift(transform.value(xp)) - sde.drift(transform.value(xm))).norm();
            probe.raw_gap[j] = (problem.drift(xp) - problem.drift(xm)).norm();
        }
        if (probe.jump > 1e-12) {
            for (std::size_t j = 0; j < 2; ++j) {
                probe.ratio[j] = probe.transformed_gap[j] / probe.transformed_gap[j + 1];
                probe.pass = probe.pass && probe.ratio[j] >= 5.0 && probe.ratio[j] <= 20.0;
            }
            for (std::size_t j = 0; j < 3; ++j)
                probe.pass = probe.pass && std::abs(probe.raw_gap[j] - probe.jump) <= 0.05 * probe.jump;
        }
        r.pass = r.pass && probe.pass;
        r.probes.push_back(std::move(probe));
    }
    return r;
}

inline ContinuityReport check_transformed_drift_continuity(const TransformedSde& sde, std::size_t samples = 32,
                                                           std::uint64_t seed = 41) {
    return check_transformed_drift_continuity(sde, continuity_offsets(sde.transform().c()), samples, seed);
}

} // namespace gmsde
