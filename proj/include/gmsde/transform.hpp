#pragma once

#include "gmsde/bump.hpp"
#include "gmsde/geometry.hpp"
#include "gmsde/sde.hpp"
#include "gmsde/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gmsde {

struct TransformOptions {
    /// The constant kappa > 1 trading the curvature term against the
    /// jump-coefficient term of the bump-radius bound.
    double kappa = 2.0;
    double safety_factor = 0.9;
    double inverse_tol = 1e-12;
    int inverse_budget = 200;
    /// Relative step for tangential central differences of alpha and for the
    /// second derivative of alpha o p.
    double fd_step = 1e-5;
};

/// Bump-radius bound. In one dimension: min(min_k 1/(6|alpha_k|), min gap/2).
/// In d dimensions: min(eps0 / (kappa max(K, 1)), min_ij b_ij).
struct CBound {
    /// Term coming from the geometry (reach, curvature); exceeding it leaves
    /// the closest-point map ill-defined on the tube.
    double geometric_term = std::numeric_limits<double>::infinity();
    /// Term coming from the size of alpha and its derivative; a sufficient
    /// condition for det G' > 0.
    double coefficient_term = std::numeric_limits<double>::infinity();
    double curvature_bound = 0.0;
    double max_alpha = 0.0;
    std::size_t samples = 0;

    double bound() const noexcept { return std::min(geometric_term, coefficient_term); }
};

namespace detail {

/// Positive root of (|da| / A) c^2 + 2 d^2 |a| c - 1 = 0 (or its linear limit).
inline double coefficient_root(double a, double da, double big_a, int d) {
    const double d2 = static_cast<double>(d) * d;
    a = std::abs(a);
    da = std::abs(da);
    if (da == 0.0) return a == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / (2.0 * d2 * a);
    const double ratio = a / da;
    return -big_a * d2 * ratio + std::sqrt(big_a * big_a * d2 * d2 * ratio * ratio + big_a / da);
}

} // namespace detail

/// The transform G(x) = x + phi~(x) alpha(p(x)) with
/// phi~(x) = s |s| phi(|s| / c), s the signed normal offset of x. G is the
/// identity outside the c-tube around the surface and removes the drift jump:
/// G(X) solves an SDE with Lipschitz coefficients.
///
/// Immutable after construction; all evaluations are pure.
class Transform {
public:
    /// Value, Jacobian and the d component Hessians at one point.
    struct Expansion {
        Vector value;
        Matrix jacobian;
        std::array<Matrix, kMaxDim> hessians;
        bool identity = true;
    };

    Transform(std::shared_ptr<const SdeProblem> problem, double c, TransformOptions options = {})
        : problem_(std::move(problem)), c_(c), options_(options) {
        if (!problem_) throw Error(ErrorCode::invalid_argument, "transform needs a problem");
        validate(*problem_);
        if (!(c_ > 0.0) || !std::isfinite(c_)) throw Error(ErrorCode::invalid_argument, "bump radius must be positive");
        if (!(options_.kappa > 1.0)) throw Error(ErrorCode::invalid_argument, "kappa must exceed 1");
    }

    const SdeProblem& problem() const noexcept { return *problem_; }
    std::shared_ptr<const SdeProblem> problem_ptr() const noexcept { return problem_; }
    double c() const noexcept { return c_; }
    const TransformOptions& options() const noexcept { return options_; }
    int dim() const noexcept { return problem_->dim; }

    std::optional<TubePoint> tube_point(const Vector& x) const { return problem_->surface.tube_point(x, c_); }

    Vector alpha_at(const TubePoint& tp) const { return problem_->alpha(tp.foot, tp.normal); }

    /// Tangential derivative of alpha at a surface point as a d x d matrix
    /// acting on tangent vectors.
    Matrix alpha_derivative_at(const TubePoint& tp) const {
        const int d = dim();
        if (problem_->alpha_derivative) return problem_->alpha_derivative(tp.foot);
        Matrix out = Matrix::Zero(d, d);
        if (d == 1) return out;
        const Matrix basis = Hypersurface::tangent_basis_for(tp.normal);
        const double h = options_.fd_step * (1.0 + tp.foot.norm());
        for (Eigen::Index k = 0; k < d - 1; ++k) {
            const Vector t = basis.col(k);
            const TubePoint plus = problem_->surface.tube_coordinates(tp.foot + h * t);
            const TubePoint minus = problem_->surface.tube_coordinates(tp.foot - h * t);
            const Vector dalpha = (alpha_at(plus) - alpha_at(minus)) / (2.0 * h);
            out += dalpha * t.transpose();
        }
        return out;
    }

    /// Jacobian of alpha o p at a tube point.
    Matrix alpha_composite_jacobian(const TubePoint& tp) const {
        if (dim() == 1) return Matrix::Zero(1, 1);
        return alpha_derivative_at(tp) * problem_->surface.projection_jacobian(tp);
    }

    Vector value(const Vector& x) const {
        const auto tp = tube_point(x);
        if (!tp) return x;
        return x + bump::profile(tp->offset, c_).value * alpha_at(*tp);
    }

    Matrix jacobian(const Vector& x) const { return expansion(x, false).jacobian; }

    /// Hessians G_k'' for k = 0..d-1. On the surface the one-sided limit from
    /// the plus side is returned.
    std::vector<Matrix> hessian(const Vector& x) const {
        const auto e = expansion(x, true);
        return {e.hessians.begin(), e.hessians.begin() + dim()};
    }

    Expansion expansion(const Vector& x, bool with_hessians = true) const {
        const int d = dim();
        Expansion e;
        e.value = x;
        e.jacobian = Matrix::Identity(d, d);
        if (with_hessians)
            for (int k = 0; k < d; ++k) e.hessians[k] = Matrix::Zero(d, d);
        const auto tp = tube_point(x);
        if (!tp) return e;

        const Vector alpha = alpha_at(*tp);
        const Matrix dbeta = alpha_composite_jacobian(*tp);
        if (alpha.isZero(0.0) && dbeta.isZero(0.0)) return e;
        e.identity = false;

        const auto prof = bump::profile(tp->offset, c_);
        const Vector& n = tp->normal;
        e.value = x + prof.value * alpha;
        e.jacobian.noalias() += prof.d1 * alpha * n.transpose();
        e.jacobian += prof.value * dbeta;
        if (!with_hessians) return e;

        // Hessian of the signed offset: D(n o p) = n'(p) Dp, symmetric.
        Matrix offset_hessian = Matrix::Zero(d, d);
        if (d > 1 && problem_->surface.kind() != SurfaceKind::hyperplane) {
            offset_hessian = problem_->surface.shape_operator(tp->foot) * problem_->surface.projection_jacobian(*tp);
            offset_hessian = (0.5 * (offset_hessian + offset_hessian.transpose())).eval();
        }
        const Matrix nnt = n * n.transpose();
        for (int k = 0; k < d; ++k) {
            const Vector grad_k = dbeta.row(k).transpose();
            e.hessians[k] = prof.d2 * alpha(k) * nnt + prof.d1 * alpha(k) * offset_hessian +
                            prof.d1 * (n * grad_k.transpose() + grad_k * n.transpose());
        }
        if (prof.value != 0.0 && !dbeta.isZero(0.0)) {
            // Second derivative of alpha o p by central differences of its
            // Jacobian; alpha o p is smooth on the whole reach-tube.
            const double h = options_.fd_step * (1.0 + x.norm());
            std::array<Matrix, kMaxDim> second;
            for (int k = 0; k < d; ++k) second[k] = Matrix::Zero(d, d);
            for (int l = 0; l < d; ++l) {
                Vector xp = x, xm = x;
                xp(l) += h;
                xm(l) -= h;
                const Matrix jp = alpha_composite_jacobian(problem_->surface.tube_coordinates(xp));
                const Matrix jm = alpha_composite_jacobian(problem_->surface.tube_coordinates(xm));
                const Matrix diff = (jp - jm) / (2.0 * h);
                for (int k = 0; k < d; ++k) second[k].col(l) = diff.row(k).transpose();
            }
            for (int k = 0; k < d; ++k)
                e.hessians[k] += prof.value * (0.5 * (second[k] + second[k].transpose()));
        }
        return e;
    }

    /// Solves G(x) = z: fixed-point iteration x <- z - phi~(x) alpha(p(x)),
    /// switching to damped Newton when the contraction stalls.
    Vector inverse(const Vector& z) const {
        if (!tube_point(z)) return z;  // G(z) = z and G is bijective
        const double tol = options_.inverse_tol * (1.0 + z.norm());
        Vector x = z;
        double previous = std::numeric_limits<double>::infinity();
        int iter = 0;
        for (; iter < options_.inverse_budget; ++iter) {
            const Vector gx = value(x);
            const double residual = (gx - z).norm();
            if (residual <= tol) return x;
            if (!std::isfinite(residual)) break;
            if (residual > (1.0 - 1e-2) * previous) break;
            previous = residual;
            x = z - (gx - x);
        }
        for (; iter < options_.inverse_budget; ++iter) {
            const Expansion e = expansion(x, false);
            const Vector r = e.value - z;
            const double residual = r.norm();
            if (residual <= tol) return x;
            const Vector step = e.jacobian.partialPivLu().solve(r);
            double t = 1.0;
            Vector next = x - step;
            while ((value(next) - z).norm() >= residual && t > 1e-6) {
                t *= 0.5;
                next = x - t * step;
            }
            x = next;
        }
        throw Error(ErrorCode::inverse_iteration_diverged,
                    "no preimage within tolerance after " + std::to_string(options_.inverse_budget) + " iterations");
    }

private:
    std::shared_ptr<const SdeProblem> problem_;
    double c_;
    TransformOptions options_;
};

/// Computes the bump-radius bound for a problem by sampling the surface.
inline CBound c_bound(const SdeProblem& problem, const TransformOptions& options = {}, std::size_t samples = 256,
                      std::uint64_t seed = 11) {
    validate(problem);
    CBound out;
    const auto& surface = problem.surface;
    if (problem.dim == 1) {
        const auto* ps = surface.as_point_set();
        if (!ps) throw Error(ErrorCode::invalid_argument, "one-dimensional problems need a point-set surface");
        out.geometric_term = surface.reach();
        for (double xi : ps->points) {
            const Vector p = make_vector({xi});
            const double a = problem.alpha(p, surface.normal(p))(0);
            if (!std::isfinite(a)) throw Error(ErrorCode::nonpositive_bound, "alpha is not finite");
            out.max_alpha = std::max(out.max_alpha, std::abs(a));
            if (a != 0.0) out.coefficient_term = std::min(out.coefficient_term, 1.0 / (6.0 * std::abs(a)));
            ++out.samples;
        }
        return out;
    }

    if (samples == 0) throw Error(ErrorCode::empty_surface_sampling, "no surface samples requested");
    const auto points = surface.sample(samples, seed, problem.box_lo, problem.box_hi);
    if (points.empty()) throw Error(ErrorCode::empty_surface_sampling, "surface sampling produced no points");

    // A transform with a placeholder radius is enough to evaluate alpha and
    // its tangential derivative on the surface.
    auto shared = std::make_shared<const SdeProblem>(problem);
    const Transform probe(shared, 1.0, options);
    const int d = problem.dim;
    const double big_a = 256.0 * (options.kappa - 1.0) / (27.0 * options.kappa * (d - 1) * d);
    for (const Vector& xi : points) {
        const TubePoint tp = surface.tube_coordinates(xi);
        const Matrix shape = surface.shape_operator(tp.foot);
        if (!shape.isZero(0.0))
            out.curvature_bound = std::max(out.curvature_bound, Eigen::JacobiSVD<Matrix>(shape).singularValues()(0));
        const Vector a = probe.alpha_at(tp);
        const Matrix da = probe.alpha_derivative_at(tp);
        if (!a.allFinite() || !da.allFinite()) throw Error(ErrorCode::nonpositive_bound, "alpha is not finite");
        out.max_alpha = std::max(out.max_alpha, a.cwiseAbs().maxCoeff());
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                out.coefficient_term = std::min(out.coefficient_term, detail::coefficient_root(a(i), da(i, j), big_a, d));
        ++out.samples;
    }
    out.geometric_term = surface.reach() / (options.kappa * std::max(out.curvature_bound, 1.0));
    return out;
}

/// Admissible bump radius: safety factor times the sampled bound. A problem
/// without any jump gets the geometric term (or 1 when that is unbounded).
inline double choose_c(const SdeProblem& problem, const TransformOptions& options = {}, std::size_t samples = 256) {
    const CBound b = c_bound(problem, options, samples);
    double bound = b.bound();
    if (std::isinf(bound)) bound = 1.0 / options.safety_factor;
    if (!(bound > 0.0)) throw Error(ErrorCode::nonpositive_bound, "bump radius bound is not positive");
    return options.safety_factor * bound;
}

} // namespace gmsde
