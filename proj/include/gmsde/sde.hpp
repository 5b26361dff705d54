#pragma once

#include "gmsde/geometry.hpp"
#include "gmsde/types.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>

namespace gmsde {

/// Drift restricted to one side of the surface. Each branch must be defined
/// and smooth on a neighborhood of its closed side, so that evaluating it on
/// the surface yields the one-sided limit of the drift.
using DriftBranch = std::function<Vector(const Vector& x, Side side)>;
using DiffusionFn = std::function<Matrix(const Vector& x)>;

/// dX = mu(X) dt + sigma(X) dW on R^d with an m-dimensional Brownian motion,
/// where mu jumps across `surface`.
struct SdeProblem {
    std::string name;
    int dim = 1;
    int noise_dim = 1;
    Hypersurface surface = Hypersurface::point_set({0.0});
    DriftBranch drift_branch;
    DiffusionFn diffusion;
    Vector x0;
    double horizon = 1.0;

    /// Optional closed-form tangential derivative of the jump coefficient at
    /// a surface point, as a d x d matrix acting on tangent vectors. When
    /// absent, it is estimated by central differences along the surface.
    std::function<Matrix(const Vector& xi)> alpha_derivative;

    /// Optional map applied to the state after every Euler step (e.g. keeping
    /// filter probabilities on the simplex).
    std::function<void(Vector&)> state_constraint;

    /// Sampling box used by the assumption checks and for sampling unbounded
    /// surfaces.
    Vector box_lo;
    Vector box_hi;

    /// Lower bound c0 in |sigma(xi)^T n(xi)| >= c0.
    double nonparallel_tol = 1e-6;

    Side side(const Vector& x) const { return surface.side(x); }

    /// The (discontinuous) drift: the branch selected by the side classifier.
    Vector drift(const Vector& x) const { return drift_branch(x, side(x)); }

    /// Drift jump coefficient at a surface point with known unit normal:
    /// (mu(xi-) - mu(xi+)) / (2 n^T sigma sigma^T n), where xi- lies against
    /// the normal. Zero wherever the branches agree.
    Vector alpha(const Vector& xi, const Vector& n) const {
        Vector jump = drift_branch(xi, Side::minus) - drift_branch(xi, Side::plus);
        if (jump.isZero(0.0)) return Vector::Zero(dim);
        const Vector st_n = diffusion(xi).transpose() * n;
        const double denom = st_n.squaredNorm();
        if (!(denom >= nonparallel_tol * nonparallel_tol)) {
            if (dim == 1)
                throw Error(ErrorCode::degenerate_diffusion_at_jump,
                            "sigma vanishes at a jump point " + std::to_string(xi(0)));
            throw Error(ErrorCode::non_parallelity_violated,
                        "|sigma^T n|^2 = " + std::to_string(denom) + " below c0^2");
        }
        return jump / (2.0 * denom);
    }

    Vector alpha(const Vector& xi) const { return alpha(xi, surface.normal(xi)); }

    /// Problem with the surface orientation flipped and the branches relabeled
    /// to match, so that it describes the same SDE.
    SdeProblem with_flipped_orientation() const {
        SdeProblem copy = *this;
        copy.surface = surface.with_flipped_orientation();
        copy.drift_branch = [inner = drift_branch](const Vector& x, Side s) { return inner(x, opposite(s)); };
        return copy;
    }
};

/// Scalar jump coefficient for one jump of a one-dimensional drift.
inline double alpha_1d(double mu_left, double mu_right, double sigma_at_jump, double tol = 1e-6) {
    if (mu_left == mu_right) return 0.0;
    if (!(std::abs(sigma_at_jump) >= tol))
        throw Error(ErrorCode::degenerate_diffusion_at_jump, "sigma vanishes where the drift jumps");
    return (mu_left - mu_right) / (2.0 * sigma_at_jump * sigma_at_jump);
}

inline void validate(const SdeProblem& p) {
    if (p.dim < 1 || p.dim > kMaxDim)
        throw Error(ErrorCode::invalid_argument, "dimension must be in [1, " + std::to_string(kMaxDim) + "]");
    if (p.noise_dim < 1 || p.noise_dim > p.dim)
        throw Error(ErrorCode::invalid_argument, "noise dimension must be in [1, d]");
    if (p.surface.dimension() != p.dim)
        throw Error(ErrorCode::invalid_argument, "surface dimension does not match the problem");
    if (!p.drift_branch || !p.diffusion) throw Error(ErrorCode::invalid_argument, "drift and diffusion required");
    if (p.x0.size() != p.dim) throw Error(ErrorCode::invalid_argument, "initial state has wrong dimension");
    if (!(p.horizon > 0.0)) throw Error(ErrorCode::invalid_argument, "horizon must be positive");
    if (p.box_lo.size() != p.dim || p.box_hi.size() != p.dim)
        throw Error(ErrorCode::invalid_argument, "sampling box has wrong dimension");
}

} // namespace gmsde
