#pragma once

#include "gmsde/geometry.hpp"
#include "gmsde/sde.hpp"
#include "gmsde/transform.hpp"
#include "gmsde/transformed_sde.hpp"
#include "gmsde/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gmsde {

struct SimulationDefaults {
    int levels = 10;
    std::size_t paths = 1024;
    std::uint64_t seed = 1;
    double slope_min = 0.35;
    double slope_max = 0.70;
};

/// A ready-made problem together with its transform and simulation defaults.
struct ExampleBundle {
    std::string name;
    std::shared_ptr<const SdeProblem> problem;
    /// Fixed bump radius; when absent it is chosen from the sampled bound.
    std::optional<double> c;
    TransformOptions transform_options;
    SimulationDefaults sim;
    /// Where each default comes from.
    std::vector<std::string> notes;
};

inline double bundle_c(const ExampleBundle& bundle) {
    return bundle.c ? *bundle.c : choose_c(*bundle.problem, bundle.transform_options);
}

inline std::shared_ptr<const Transform> make_transform(const ExampleBundle& bundle) {
    return std::make_shared<const Transform>(bundle.problem, bundle_c(bundle), bundle.transform_options);
}

inline std::shared_ptr<const TransformedSde> make_transformed_sde(const ExampleBundle& bundle) {
    return std::make_shared<const TransformedSde>(make_transform(bundle));
}

// ---------------------------------------------------------------------------
// Drift jumping across the unit circle
// ---------------------------------------------------------------------------

enum class UnitCircleVariant {
    standard,
    /// Both sides use the outer branch: no jump at all.
    smooth,
    /// sigma == 0: violates non-parallelity.
    zero_diffusion,
};

/// mu(x, y) = (-x, -y) outside the unit circle, (x, 0) inside; sigma = id.
/// Paper parameters: c = 1/2. Defaults: x0 = (0.1, 0.1), T = 1.
inline ExampleBundle build_unit_circle(UnitCircleVariant variant = UnitCircleVariant::standard) {
    SdeProblem p;
    p.name = "unit-circle";
    p.dim = 2;
    p.noise_dim = 2;
    p.surface = Hypersurface::sphere(Vector::Zero(2), 1.0);
    const bool smooth = variant == UnitCircleVariant::smooth;
    p.drift_branch = [smooth](const Vector& x, Side side) -> Vector {
        if (side == Side::plus || smooth) return -x;
        return make_vector({x(0), 0.0});
    };
    if (variant == UnitCircleVariant::zero_diffusion) {
        p.diffusion = [](const Vector&) -> Matrix { return Matrix::Zero(2, 2); };
    } else {
        p.diffusion = [](const Vector&) -> Matrix { return Matrix::Identity(2, 2); };
    }
    if (variant == UnitCircleVariant::standard) {
        // alpha(xi) = (xi_1, xi_2 / 2) is linear; its tangential derivative is
        // diag(1, 1/2) restricted to the tangent line.
        p.alpha_derivative = [](const Vector& xi) -> Matrix {
            const Vector n = xi.normalized();
            Matrix d = Matrix::Zero(2, 2);
            d(0, 0) = 1.0;
            d(1, 1) = 0.5;
            return d * (Matrix::Identity(2, 2) - n * n.transpose());
        };
    }
    p.x0 = make_vector({0.1, 0.1});
    p.horizon = 1.0;
    p.box_lo = make_vector({-2.0, -2.0});
    p.box_hi = make_vector({2.0, 2.0});

    ExampleBundle b;
    b.name = variant == UnitCircleVariant::standard ? "unit-circle"
             : variant == UnitCircleVariant::smooth ? "unit-circle-smooth"
                                                    : "unit-circle-sigma0";
    p.name = b.name;
    b.problem = std::make_shared<const SdeProblem>(std::move(p));
    b.c = 0.5;
    b.sim = {10, 1024, 1, 0.35, 0.70};
    b.notes = {"c = 1/2 from the published experiment", "x0 = (0.1, 0.1) and T = 1 are defaults"};
    return b;
}

// ---------------------------------------------------------------------------
// One-dimensional drift with finitely many jumps
// ---------------------------------------------------------------------------

using ScalarFn = std::function<double(double)>;

/// Drift equal to pieces[k] between jump k-1 and jump k (pieces.size() ==
/// jump_points.size() + 1), diffusion sigma.
inline ExampleBundle build_1d_jump(std::vector<ScalarFn> pieces, std::vector<double> jump_points, ScalarFn sigma,
                                   double x0 = 0.0, double horizon = 1.0) {
    if (jump_points.empty()) throw Error(ErrorCode::invalid_argument, "at least one jump point required");
    if (!std::is_sorted(jump_points.begin(), jump_points.end()))
        throw Error(ErrorCode::invalid_argument, "jump points must be sorted");
    if (pieces.size() != jump_points.size() + 1)
        throw Error(ErrorCode::invalid_argument, "need one drift piece per interval");
    for (std::size_t k = 0; k < jump_points.size(); ++k) {
        const double xi = jump_points[k];
        alpha_1d(pieces[k](xi), pieces[k + 1](xi), sigma(xi));  // validates sigma at the jump
    }

    SdeProblem p;
    p.name = "1d-jump";
    p.dim = 1;
    p.noise_dim = 1;
    p.surface = Hypersurface::point_set(jump_points);
    const std::vector<double> points = p.surface.as_point_set()->points;
    p.drift_branch = [pieces, points](const Vector& x, Side side) -> Vector {
        // Branches are relative to the nearest jump location.
        auto it = std::lower_bound(points.begin(), points.end(), x(0));
        std::size_t k = static_cast<std::size_t>(it - points.begin());
        if (k == points.size() || (k > 0 && x(0) - points[k - 1] <= points[k] - x(0))) --k;
        const std::size_t piece = side == Side::plus ? k + 1 : k;
        return make_vector({pieces[piece](x(0))});
    };
    p.diffusion = [sigma](const Vector& x) -> Matrix { return Matrix::Constant(1, 1, sigma(x(0))); };
    p.x0 = make_vector({x0});
    p.horizon = horizon;
    p.box_lo = make_vector({points.front() - 2.0});
    p.box_hi = make_vector({points.back() + 2.0});

    ExampleBundle b;
    b.name = "1d-jump";
    b.problem = std::make_shared<const SdeProblem>(std::move(p));
    b.sim = {10, 1024, 1, 0.35, 0.70};
    b.notes = {"c chosen as 0.9 x min(1/(6|alpha_k|), gap/2)"};
    return b;
}

/// Single jump at `jump`: mu_left to the left, mu_right to the right.
inline ExampleBundle build_1d_jump(ScalarFn mu_left, ScalarFn mu_right, double jump, ScalarFn sigma,
                                   double x0 = 0.0, double horizon = 1.0) {
    return build_1d_jump(std::vector<ScalarFn>{std::move(mu_left), std::move(mu_right)}, {jump}, std::move(sigma),
                         x0, horizon);
}

/// mu = 1 left of 0, -1 right of 0, sigma = 1, x0 = 0.
inline ExampleBundle build_1d_reference() {
    return build_1d_jump([](double) { return 1.0; }, [](double) { return -1.0; }, 0.0, [](double) { return 1.0; });
}

// ---------------------------------------------------------------------------
// Dividend maximization under partial information, threshold policy
// ---------------------------------------------------------------------------

struct DividendParams {
    /// Surplus drift in each state of the hidden chain; its size is the system
    /// dimension (surplus plus one filter probability per state but the last).
    std::vector<double> alphas;
    /// Intensity matrix of the chain; rows sum to zero.
    Eigen::MatrixXd intensity;
    double beta = 0.4;
    double ubar = 0.5;
    /// Threshold b(abar) = b_intercept + b_slope * abar.
    double b_intercept = 0.8;
    double b_slope = 0.5;
    /// (R0, pi_1, ..., pi_{d-1}); empty means (1, 1/d, ..., 1/d).
    std::vector<double> x0;
    double horizon = 1.0;

    /// 5-state chain, alphas equally spaced in [0.5, 1.5], q_ii = -1,
    /// q_ij = 1/(d-1).
    static DividendParams defaults(int states = 5) {
        DividendParams p;
        p.alphas.resize(static_cast<std::size_t>(states));
        for (int i = 0; i < states; ++i) p.alphas[static_cast<std::size_t>(i)] = 0.5 + static_cast<double>(i) / (states - 1);
        p.intensity = default_intensity(states);
        return p;
    }

    static Eigen::MatrixXd default_intensity(int states) {
        Eigen::MatrixXd q = Eigen::MatrixXd::Constant(states, states, 1.0 / (states - 1));
        q.diagonal().setConstant(-1.0);
        return q;
    }
};

/// R drift abar - u, filter dynamics driven by the same scalar Brownian
/// motion; u = ubar above the threshold surface R = b(abar(pi)), 0 below.
inline ExampleBundle build_dividend(DividendParams params = DividendParams::defaults()) {
    const int d = static_cast<int>(params.alphas.size());
    if (d < 2 || d > kMaxDim)
        throw Error(ErrorCode::invalid_argument, "number of chain states must be in [2, " + std::to_string(kMaxDim) + "]");
    if (params.intensity.rows() != d || params.intensity.cols() != d)
        throw Error(ErrorCode::invalid_intensity_matrix, "intensity matrix must be d x d");
    for (int i = 0; i < d; ++i)
        if (std::abs(params.intensity.row(i).sum()) > 1e-12)
            throw Error(ErrorCode::invalid_intensity_matrix, "row " + std::to_string(i) + " does not sum to zero");
    if (!(params.beta > 0.0)) throw Error(ErrorCode::invalid_argument, "beta must be positive");
    if (!(params.ubar > 0.0)) throw Error(ErrorCode::invalid_argument, "ubar must be positive");
    if (params.x0.empty()) {
        params.x0.assign(static_cast<std::size_t>(d), 1.0 / d);
        params.x0[0] = 1.0;
    }
    if (static_cast<int>(params.x0.size()) != d)
        throw Error(ErrorCode::invalid_argument, "initial state must have " + std::to_string(d) + " entries");
    double mass = 0.0;
    for (int i = 1; i < d; ++i) {
        if (params.x0[static_cast<std::size_t>(i)] < 0.0)
            throw Error(ErrorCode::invalid_simplex_start, "negative initial filter probability");
        mass += params.x0[static_cast<std::size_t>(i)];
    }
    if (mass > 1.0 + 1e-12) throw Error(ErrorCode::invalid_simplex_start, "initial filter probabilities exceed 1");

    Vector alphas(d);
    for (int i = 0; i < d; ++i) alphas(i) = params.alphas[static_cast<std::size_t>(i)];
    const double alpha_last = alphas(d - 1);
    const Eigen::MatrixXd q = params.intensity;
    const double beta = params.beta;
    const double ubar = params.ubar;
    const double b0 = params.b_intercept;
    const double b1 = params.b_slope;

    // abar(pi) = alpha_d + sum_i (alpha_i - alpha_d) pi_i over the filter coordinates.
    auto abar = [alphas, alpha_last, d](const Vector& x) {
        double a = alpha_last;
        for (int i = 1; i < d; ++i) a += (alphas(i - 1) - alpha_last) * x(i);
        return a;
    };

    SdeProblem p;
    p.name = "dividend";
    p.dim = d;
    p.noise_dim = 1;

    GraphFunction threshold;
    threshold.value = [alphas, alpha_last, b0, b1, d](const Vector& pi) {
        double a = alpha_last;
        for (int i = 0; i < d - 1; ++i) a += (alphas(i) - alpha_last) * pi(i);
        return b0 + b1 * a;
    };
    threshold.gradient = [alphas, alpha_last, b1, d](const Vector&) -> Vector {
        Vector g(d - 1);
        for (int i = 0; i < d - 1; ++i) g(i) = b1 * (alphas(i) - alpha_last);
        return g;
    };
    threshold.hessian = [d](const Vector&) -> Matrix { return Matrix::Zero(d - 1, d - 1); };
    // Uniform on the probability simplex from sorted uniforms.
    auto simplex_sampler = [d](const Vector& unit) -> Vector {
        std::vector<double> cuts(unit.data(), unit.data() + unit.size());
        std::sort(cuts.begin(), cuts.end());
        Vector pi(d - 1);
        double prev = 0.0;
        for (int i = 0; i < d - 1; ++i) {
            pi(i) = cuts[static_cast<std::size_t>(i)] - prev;
            prev = cuts[static_cast<std::size_t>(i)];
        }
        return pi;
    };
    // An affine threshold makes the surface a hyperplane: infinite reach.
    p.surface = Hypersurface::graph(d, 0, std::move(threshold), std::numeric_limits<double>::infinity(),
                                    simplex_sampler);

    p.drift_branch = [abar, q, ubar, d](const Vector& x, Side side) -> Vector {
        Vector mu(d);
        mu(0) = abar(x) - (side == Side::plus ? ubar : 0.0);
        for (int i = 1; i < d; ++i) {
            double v = q(d - 1, i - 1);
            for (int j = 1; j < d; ++j) v += (q(j - 1, i - 1) - q(d - 1, i - 1)) * x(j);
            mu(i) = v;
        }
        return mu;
    };
    p.diffusion = [abar, alphas, beta, d](const Vector& x) -> Matrix {
        Matrix s(d, 1);
        const double a = abar(x);
        s(0, 0) = beta;
        for (int i = 1; i < d; ++i) s(i, 0) = x(i) * (alphas(i - 1) - a) / beta;
        return s;
    };
    p.state_constraint = [d](Vector& x) {
        double mass = 0.0;
        for (int i = 1; i < d; ++i) {
            x(i) = std::clamp(x(i), 0.0, 1.0);
            mass += x(i);
        }
        if (mass > 1.0)
            for (int i = 1; i < d; ++i) x(i) /= mass;
    };
    p.x0 = Vector(d);
    for (int i = 0; i < d; ++i) p.x0(i) = params.x0[static_cast<std::size_t>(i)];
    p.horizon = params.horizon;
    p.box_lo = Vector::Zero(d);
    p.box_hi = Vector::Ones(d);
    p.box_lo(0) = -1.0;
    p.box_hi(0) = 3.0;

    ExampleBundle b;
    b.name = "dividend";
    b.problem = std::make_shared<const SdeProblem>(std::move(p));
    b.sim = {9, 1024, 1, 0.30, 0.75};
    b.notes = {"all dividend parameters are defaults, not published values",
               "filter coordinates are clamped to the simplex after each step"};
    return b;
}

} // namespace gmsde
