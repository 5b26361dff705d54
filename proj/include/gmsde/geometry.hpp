#pragma once

#include "gmsde/rng.hpp"
#include "gmsde/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace gmsde {

enum class SurfaceKind { point_set_1d, hyperplane, sphere, graph };

inline std::string to_string(SurfaceKind kind) {
    switch (kind) {
    case SurfaceKind::point_set_1d: return "points";
    case SurfaceKind::hyperplane: return "hyperplane";
    case SurfaceKind::sphere: return "sphere";
    case SurfaceKind::graph: return "graph";
    }
    return "unknown";
}

/// Scalar function g of the d-1 graph coordinates, with derivatives.
struct GraphFunction {
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&)> gradient;
    std::function<Matrix(const Vector&)> hessian;
};

/// Local description of a point x inside the tubular neighborhood:
/// x = foot + offset * normal.
struct TubePoint {
    Vector foot;
    Vector normal;
    double offset = 0.0;

    double distance() const noexcept { return std::abs(offset); }
};

/// Closed-point membership tolerance, scale-aware.
inline double membership_tolerance(const Vector& x) noexcept { return 1e-9 * (1.0 + x.norm()); }

/// The exceptional hypersurface carrying the drift discontinuities, together
/// with the geometric queries the transform needs: distance, closest point,
/// unit normal, shape operator, and reach.
///
/// A descriptor is immutable after construction.
class Hypersurface {
public:
    struct PointSet {
        std::vector<double> points;
    };
    struct Plane {
        Vector normal;
        double offset;
    };
    struct Ball {
        Vector center;
        double radius;
    };
    struct Graph {
        int coordinate;
        GraphFunction g;
        /// Maps d-1 uniforms in (0,1) to graph coordinates, for sampling.
        std::function<Vector(const Vector&)> parameter_sampler;
    };

    /// Finite set of jump locations on the real line. Reach is half the
    /// minimal gap (infinite for a single point).
    static Hypersurface point_set(std::vector<double> points) {
        if (points.empty()) throw Error(ErrorCode::invalid_argument, "point set must not be empty");
        std::sort(points.begin(), points.end());
        double reach = std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k < points.size(); ++k) {
            const double gap = points[k] - points[k - 1];
            if (!(gap > 0.0)) throw Error(ErrorCode::invalid_argument, "jump locations must be distinct");
            reach = std::min(reach, gap / 2.0);
        }
        return Hypersurface(1, reach, PointSet{std::move(points)});
    }

    /// {x : a.x = b}; `a` is normalized, `b` rescaled accordingly.
    static Hypersurface hyperplane(Vector a, double b) {
        const double len = a.norm();
        if (!(len > 0.0)) throw Error(ErrorCode::invalid_argument, "hyperplane normal must be nonzero");
        const auto dim = static_cast<int>(a.size());
        return Hypersurface(dim, std::numeric_limits<double>::infinity(), Plane{a / len, b / len});
    }

    static Hypersurface sphere(Vector center, double radius) {
        if (!(radius > 0.0)) throw Error(ErrorCode::invalid_argument, "sphere radius must be positive");
        if (center.size() < 2) throw Error(ErrorCode::invalid_argument, "sphere needs dimension >= 2");
        const auto dim = static_cast<int>(center.size());
        return Hypersurface(dim, radius, Ball{std::move(center), radius});
    }

    /// {x : x_i = g(x without coordinate i)}. `reach` is a user-supplied lower
    /// bound on the reach; it is not computed.
    static Hypersurface graph(int dim, int coordinate, GraphFunction g, double reach,
                              std::function<Vector(const Vector&)> parameter_sampler = {}) {
        if (dim < 2) throw Error(ErrorCode::invalid_argument, "graph surface needs dimension >= 2");
        if (coordinate < 0 || coordinate >= dim)
            throw Error(ErrorCode::invalid_argument, "graph coordinate out of range");
        if (!(reach > 0.0)) throw Error(ErrorCode::invalid_argument, "reach must be positive");
        if (!g.value || !g.gradient || !g.hessian)
            throw Error(ErrorCode::invalid_argument, "graph function needs value, gradient and hessian");
        return Hypersurface(dim, reach, Graph{coordinate, std::move(g), std::move(parameter_sampler)});
    }

    int dimension() const noexcept { return dim_; }
    double reach() const noexcept { return reach_; }
    double orientation() const noexcept { return orientation_; }

    SurfaceKind kind() const noexcept {
        return std::visit(
            [](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, PointSet>) return SurfaceKind::point_set_1d;
                else if constexpr (std::is_same_v<T, Plane>) return SurfaceKind::hyperplane;
                else if constexpr (std::is_same_v<T, Ball>) return SurfaceKind::sphere;
                else return SurfaceKind::graph;
            },
            shape_);
    }

    const PointSet* as_point_set() const noexcept { return std::get_if<PointSet>(&shape_); }
    const Plane* as_hyperplane() const noexcept { return std::get_if<Plane>(&shape_); }
    const Ball* as_sphere() const noexcept { return std::get_if<Ball>(&shape_); }
    const Graph* as_graph() const noexcept { return std::get_if<Graph>(&shape_); }

    /// Same surface with the opposite unit normal field.
    Hypersurface with_flipped_orientation() const {
        Hypersurface copy = *this;
        copy.orientation_ = -orientation_;
        return copy;
    }

    /// Side classification for any point of the ambient space; consistent with
    /// the sign of the normal offset inside the tube. Ties go to `plus`.
    Side side(const Vector& x) const {
        check_dim(x);
        double s = 0.0;
        if (const auto* ps = as_point_set()) {
            s = x(0) - ps->points[nearest_index(*ps, x(0))];
        } else if (const auto* pl = as_hyperplane()) {
            s = pl->normal.dot(x) - pl->offset;
        } else if (const auto* b = as_sphere()) {
            s = (x - b->center).norm() - b->radius;
        } else {
            const auto& gr = std::get<Graph>(shape_);
            s = x(gr.coordinate) - gr.g.value(drop(x, gr.coordinate));
        }
        return orientation_ * s >= 0.0 ? Side::plus : Side::minus;
    }

    /// inf over the surface of |x - y|.
    double distance(const Vector& x) const {
        check_dim(x);
        if (const auto* ps = as_point_set()) {
            return std::abs(x(0) - ps->points[nearest_index(*ps, x(0))]);
        }
        if (const auto* pl = as_hyperplane()) return std::abs(pl->normal.dot(x) - pl->offset);
        if (const auto* b = as_sphere()) return std::abs((x - b->center).norm() - b->radius);
        return (x - graph_projection(x)).norm();
    }

    bool contains(const Vector& x) const { return distance(x) <= membership_tolerance(x); }

    /// Closest surface point. Requires distance(x) <= reach; on the boundary
    /// of the tube the foot is returned but the normal coordinates are not.
    Vector project(const Vector& x) const {
        auto tp = local_coordinates(x);
        if (tp.distance() > reach_)
            throw Error(ErrorCode::query_outside_tubular_neighborhood,
                        "distance " + std::to_string(tp.distance()) + " > reach " + std::to_string(reach_));
        return tp.foot;
    }

    /// Closest point, normal there, and signed offset. Requires distance(x) < reach.
    TubePoint tube_coordinates(const Vector& x) const {
        auto tp = local_coordinates(x);
        if (!(tp.distance() < reach_))
            throw Error(ErrorCode::query_outside_tubular_neighborhood,
                        "distance " + std::to_string(tp.distance()) + " >= reach " + std::to_string(reach_));
        return tp;
    }

    /// Tube coordinates if distance(x) < radius (radius <= reach), nothing otherwise.
    std::optional<TubePoint> tube_point(const Vector& x, double radius) const {
        check_dim(x);
        if (const auto* b = as_sphere()) {
            // fast rejection without building the foot point
            if (std::abs((x - b->center).norm() - b->radius) >= radius) return std::nullopt;
        } else if (const auto* pl = as_hyperplane()) {
            if (std::abs(pl->normal.dot(x) - pl->offset) >= radius) return std::nullopt;
        }
        auto tp = local_coordinates(x);
        if (!(tp.distance() < radius)) return std::nullopt;
        return tp;
    }

    /// Unit normal at a surface point, oriented per descriptor: outward for a
    /// sphere, `a` for a hyperplane, positive graph coordinate for a graph,
    /// +1 for a point set (times the orientation flag).
    Vector normal(const Vector& xi) const {
        check_dim(xi);
        if (!contains(xi))
            throw Error(ErrorCode::not_on_surface, "point is not on the surface within tolerance");
        return normal_at_foot(xi);
    }

    /// Orthonormal basis of the tangent space at a surface point, as columns
    /// of a d x (d-1) matrix.
    Matrix tangent_basis(const Vector& xi) const { return tangent_basis_for(normal_at_foot(xi)); }

    static Matrix tangent_basis_for(const Vector& n) {
        const auto d = n.size();
        Matrix basis(d, d - 1);
        if (d == 1) return basis;
        if (d == 2) {
            basis(0, 0) = -n(1);
            basis(1, 0) = n(0);
            return basis;
        }
        const Matrix column = n;
        Eigen::HouseholderQR<Matrix> qr(column);
        Matrix q = qr.householderQ();
        basis = q.rightCols(d - 1);
        return basis;
    }

    /// Derivative of the normal field at a surface point, as a d x d matrix
    /// acting on tangent vectors (and annihilating the normal).
    Matrix shape_operator(const Vector& xi) const {
        const Eigen::Index d = dim_;
        Matrix op = Matrix::Zero(d, d);
        if (const auto* b = as_sphere()) {
            const Vector n = (xi - b->center).normalized();
            op = (Matrix::Identity(d, d) - n * n.transpose()) * (orientation_ / b->radius);
        } else if (const auto* gr = as_graph()) {
            const Vector u = drop(xi, gr->coordinate);
            const Vector grad = gr->g.gradient(u);
            const Matrix hess = gr->g.hessian(u);
            Vector big = embed(-grad, 1.0, gr->coordinate);
            const double len = big.norm();
            const Vector n = big / len;
            // dN/dx restricted to the graph coordinates: d(-grad g)/du = -H.
            Matrix dbig = Matrix::Zero(d, d);
            for (Eigen::Index r = 0, rr = 0; r < d; ++r) {
                if (r == gr->coordinate) continue;
                for (Eigen::Index c = 0, cc = 0; c < d; ++c) {
                    if (c == gr->coordinate) continue;
                    dbig(r, c) = -hess(rr, cc);
                    ++cc;
                }
                ++rr;
            }
            const Matrix tangent_proj = Matrix::Identity(d, d) - n * n.transpose();
            op = tangent_proj * dbig * tangent_proj * (orientation_ / len);
        }
        return op;
    }

    /// Jacobian of the closest-point map at a tube point: the inverse of
    /// (id + offset * n') on the tangent space composed with the tangential
    /// projection (id - n n^T).
    Matrix projection_jacobian(const TubePoint& tp) const {
        const Eigen::Index d = dim_;
        if (d == 1) return Matrix::Zero(1, 1);
        if (const auto* pl = as_hyperplane()) {
            return Matrix::Identity(d, d) - pl->normal * pl->normal.transpose();
        }
        const Matrix basis = tangent_basis_for(tp.normal);
        const Matrix shape = shape_operator(tp.foot);
        Matrix local = Matrix::Identity(d - 1, d - 1) + tp.offset * (basis.transpose() * shape * basis);
        const Matrix inv = local.partialPivLu().inverse();
        return basis * inv * basis.transpose();
    }

    /// `count` points on the surface, deterministic in `seed`. Unbounded
    /// surfaces are sampled over the box [lo, hi] (graph: over the graph
    /// coordinates, or through the parameter sampler when one is provided).
    std::vector<Vector> sample(std::size_t count, std::uint64_t seed, const Vector& lo, const Vector& hi) const {
        std::vector<Vector> out;
        out.reserve(count);
        SequentialRng rng(seed, 0x5eed5u);
        const Eigen::Index d = dim_;
        for (std::size_t k = 0; k < count; ++k) {
            if (const auto* ps = as_point_set()) {
                out.push_back(make_vector({ps->points[k % ps->points.size()]}));
            } else if (const auto* pl = as_hyperplane()) {
                Vector x(d);
                for (Eigen::Index i = 0; i < d; ++i) x(i) = rng.uniform(lo(i), hi(i));
                out.push_back(x - (pl->normal.dot(x) - pl->offset) * pl->normal);
            } else if (const auto* b = as_sphere()) {
                Vector g(d);
                for (Eigen::Index i = 0; i < d; ++i) g(i) = rng.gaussian();
                out.push_back(b->center + b->radius * g.normalized());
            } else {
                const auto& gr = std::get<Graph>(shape_);
                Vector u(d - 1);
                if (gr.parameter_sampler) {
                    Vector unit(d - 1);
                    for (Eigen::Index i = 0; i < d - 1; ++i) unit(i) = rng.uniform();
                    u = gr.parameter_sampler(unit);
                } else {
                    const Vector lo_u = drop(lo, gr.coordinate);
                    const Vector hi_u = drop(hi, gr.coordinate);
                    for (Eigen::Index i = 0; i < d - 1; ++i) u(i) = rng.uniform(lo_u(i), hi_u(i));
                }
                out.push_back(embed(u, gr.g.value(u), gr.coordinate));
            }
        }
        return out;
    }

    /// Removes coordinate `i`.
    static Vector drop(const Vector& x, int i) {
        Vector u(x.size() - 1);
        for (Eigen::Index k = 0, j = 0; k < x.size(); ++k)
            if (k != i) u(j++) = x(k);
        return u;
    }

    /// Inserts `value` as coordinate `i`.
    static Vector embed(const Vector& u, double value, int i) {
        Vector x(u.size() + 1);
        for (Eigen::Index k = 0, j = 0; k < x.size(); ++k) x(k) = (k == i) ? value : u(j++);
        return x;
    }

private:
    using Shape = std::variant<PointSet, Plane, Ball, Graph>;

    Hypersurface(int dim, double reach, Shape shape) : dim_(dim), reach_(reach), shape_(std::move(shape)) {}

    void check_dim(const Vector& x) const {
        if (x.size() != dim_)
            throw Error(ErrorCode::invalid_argument,
                        "point has dimension " + std::to_string(x.size()) + ", surface lives in " +
                            std::to_string(dim_));
    }

    static std::size_t nearest_index(const PointSet& ps, double x) {
        const auto& p = ps.points;
        auto it = std::lower_bound(p.begin(), p.end(), x);
        if (it == p.begin()) return 0;
        if (it == p.end()) return p.size() - 1;
        const auto hi = static_cast<std::size_t>(it - p.begin());
        return (x - p[hi - 1] <= p[hi] - x) ? hi - 1 : hi;
    }

    Vector normal_at_foot(const Vector& xi) const {
        if (as_point_set()) return make_vector({orientation_});
        if (const auto* pl = as_hyperplane()) return orientation_ * pl->normal;
        if (const auto* b = as_sphere()) return orientation_ * (xi - b->center).normalized();
        const auto& gr = std::get<Graph>(shape_);
        const Vector grad = gr.g.gradient(drop(xi, gr.coordinate));
        return orientation_ * embed(-grad, 1.0, gr.coordinate).normalized();
    }

    TubePoint local_coordinates(const Vector& x) const {
        check_dim(x);
        TubePoint tp;
        if (const auto* ps = as_point_set()) {
            const double xi = ps->points[nearest_index(*ps, x(0))];
            tp.foot = make_vector({xi});
            tp.normal = make_vector({orientation_});
            tp.offset = orientation_ * (x(0) - xi);
            return tp;
        }
        if (const auto* pl = as_hyperplane()) {
            const double s = pl->normal.dot(x) - pl->offset;
            tp.foot = x - s * pl->normal;
            tp.normal = orientation_ * pl->normal;
            tp.offset = orientation_ * s;
            return tp;
        }
        if (const auto* b = as_sphere()) {
            const Vector r = x - b->center;
            const double rho = r.norm();
            if (!(rho > 0.0))
                throw Error(ErrorCode::query_outside_tubular_neighborhood, "sphere center has no closest point");
            const Vector u = r / rho;
            tp.foot = b->center + b->radius * u;
            tp.normal = orientation_ * u;
            tp.offset = orientation_ * (rho - b->radius);
            return tp;
        }
        tp.foot = graph_projection(x);
        tp.normal = normal_at_foot(tp.foot);
        tp.offset = (x - tp.foot).dot(tp.normal);
        return tp;
    }

    /// Damped Newton on the first-order optimality condition of
    /// 1/2 |x - (u, g(u))|^2 over the graph coordinates u.
    Vector graph_projection(const Vector& x) const {
        const auto& gr = std::get<Graph>(shape_);
        const int i = gr.coordinate;
        const Vector target = drop(x, i);
        const double height = x(i);
        const double tol = 1e-12 * (1.0 + x.norm());
        auto objective = [&](const Vector& u) {
            const double dv = gr.g.value(u) - height;
            return 0.5 * ((u - target).squaredNorm() + dv * dv);
        };
        Vector u = target;
        const Eigen::Index m = u.size();
        for (int iter = 0; iter < 100; ++iter) {
            const double gv = gr.g.value(u);
            const Vector grad = gr.g.gradient(u);
            const Vector residual = (u - target) + (gv - height) * grad;
            if (residual.norm() <= tol) return embed(u, gv, i);
            Matrix h = Matrix::Identity(m, m) + grad * grad.transpose() + (gv - height) * gr.g.hessian(u);
            Eigen::LDLT<Matrix> ldlt(h);
            Vector step;
            if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
                step = ldlt.solve(residual);
            } else {
                // Gauss-Newton model when the full Hessian is indefinite.
                const Matrix gn = Matrix::Identity(m, m) + grad * grad.transpose();
                step = gn.ldlt().solve(residual);
            }
            const double f0 = objective(u);
            double t = 1.0;
            Vector next = u - step;
            // Near the optimum objective changes fall below roundoff; allow for that.
            const double slack = 1e-14 * (1.0 + x.squaredNorm());
            while (objective(next) > f0 + slack && t > 1e-8) {
                t *= 0.5;
                next = u - t * step;
            }
            u = next;
        }
        const Vector grad = gr.g.gradient(u);
        const Vector residual = (u - target) + (gr.g.value(u) - height) * grad;
        if (residual.norm() <= tol) return embed(u, gr.g.value(u), i);
        throw Error(ErrorCode::no_convergence, "graph projection did not reach tolerance in 100 iterations");
    }

    int dim_;
    double reach_;
    double orientation_ = 1.0;
    Shape shape_;
};

/// Result of sampling the normal-derivative bound |n'| <= 2 (d-1) / reach.
struct NormalDerivativeReport {
    double max_observed = 0.0;
    double bound = 0.0;
    bool pass = true;
    std::size_t samples = 0;
};

/// Estimates |n'(xi)| (operator norm on the tangent space) by central
/// differences of the normal field along tangent directions at sampled
/// surface points, and compares against 2 (d-1) / reach.
inline NormalDerivativeReport normal_derivative_bound_check(const Hypersurface& surface, std::size_t samples,
                                                           const Vector& lo, const Vector& hi,
                                                           double tolerance = 1e-6, std::uint64_t seed = 17) {
    NormalDerivativeReport report;
    const int d = surface.dimension();
    report.bound = std::isinf(surface.reach()) ? 0.0 : 2.0 * (d - 1) / surface.reach();
    if (d == 1 || surface.kind() == SurfaceKind::hyperplane) {
        report.samples = samples;
        return report;
    }
    for (const Vector& xi : surface.sample(samples, seed, lo, hi)) {
        const Vector foot = surface.project(xi);
        const Matrix basis = surface.tangent_basis(foot);
        const double h = 1e-5 * (1.0 + xi.norm());
        Matrix dn(d, d - 1);
        for (Eigen::Index k = 0; k < d - 1; ++k) {
            const Vector t = basis.col(k);
            const Vector plus = surface.tube_coordinates(foot + h * t).normal;
            const Vector minus = surface.tube_coordinates(foot - h * t).normal;
            dn.col(k) = (plus - minus) / (2.0 * h);
        }
        const double norm = Eigen::JacobiSVD<Matrix>(dn).singularValues()(0);
        report.max_observed = std::max(report.max_observed, norm);
        ++report.samples;
    }
    report.pass = report.max_observed <= report.bound * (1.0 + tolerance) + 1e-9;
    return report;
}

struct ReachReport {
    /// Offset radius actually probed: the reach, capped for unbounded reach.
    double radius = 0.0;
    /// Largest |p(xi + t n) - xi| over the probes.
    double max_foot_error = 0.0;
    std::size_t probes = 0;
    bool pass = true;
};

/// Sampled unique-closest-point test of the declared reach: moving off a
/// surface point along its normal by |t| < reach must project back onto the
/// same point.
inline ReachReport unique_closest_point_check(const Hypersurface& surface, std::size_t samples, const Vector& lo,
                                              const Vector& hi, double cap = 1.0, std::uint64_t seed = 19) {
    ReachReport report;
    report.radius = std::min(surface.reach(), cap);
    SequentialRng rng(seed, 4);
    for (const Vector& xi : surface.sample(samples, seed, lo, hi)) {
        const Vector foot = surface.project(xi);
        const Vector n = surface.normal(foot);
        for (int k = 0; k < 4; ++k) {
            const double t = rng.uniform(-1.0, 1.0) * report.radius * (1.0 - 1e-6);
            const Vector back = surface.project(foot + t * n);
            report.max_foot_error = std::max(report.max_foot_error, (back - foot).norm());
            ++report.probes;
        }
    }
    report.pass = report.max_foot_error <= 1e-8 * (1.0 + hi.cwiseAbs().maxCoeff());
    return report;
}

} // namespace gmsde
