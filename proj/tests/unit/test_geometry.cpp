#include "gmsde/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace {

using namespace gmsde;

Hypersurface parabola() {
    GraphFunction g;
    g.value = [](const Vector& u) { return u(0) * u(0); };
    g.gradient = [](const Vector& u) { return make_vector({2.0 * u(0)}); };
    g.hessian = [](const Vector&) { return Matrix::Constant(1, 1, 2.0); };
    // Minimal radius of curvature of t^2 is 1/2.
    return Hypersurface::graph(2, 1, g, 0.5);
}

void expect_vec_near(const Vector& a, const Vector& b, double tol) {
    ASSERT_EQ(a.size(), b.size());
    EXPECT_LE((a - b).norm(), tol) << "got " << a.transpose() << " expected " << b.transpose();
}

TEST(Project, SphereRadial) {
    const auto s = Hypersurface::sphere(Vector::Zero(2), 1.0);
    expect_vec_near(s.project(make_vector({2.0, 0.0})), make_vector({1.0, 0.0}), 1e-15);
    expect_vec_near(s.project(make_vector({0.72, 0.96})), make_vector({0.6, 0.8}), 1e-15);
}

TEST(Project, SphereAgreesWithDenseSampling) {
    const auto s = Hypersurface::sphere(Vector::Zero(2), 1.0);
    const Vector x = make_vector({0.72, 0.96});
    double best = INFINITY;
    Vector arg;
    for (int k = 0; k < 200000; ++k) {
        const double t = 2 * std::numbers::pi * k / 200000;
        const Vector y = make_vector({std::cos(t), std::sin(t)});
        if ((x - y).norm() < best) {
            best = (x - y).norm();
            arg = y;
        }
    }
    expect_vec_near(s.project(x), arg, 1e-4);
    EXPECT_NEAR(s.distance(x), best, 1e-9);
}

TEST(Project, Hyperplane) {
    const auto p = Hypersurface::hyperplane(make_vector({1.0, 0.0, 0.0}), 0.0);
    expect_vec_near(p.project(make_vector({0.3, 7.0, -2.0})), make_vector({0.0, 7.0, -2.0}), 0.0);
}

TEST(Project, HyperplaneNormalizesItsEquation) {
    const auto p = Hypersurface::hyperplane(make_vector({0.0, 2.0}), 4.0);
    EXPECT_NEAR(p.distance(make_vector({5.0, 3.0})), 1.0, 1e-15);
    expect_vec_near(p.normal(make_vector({1.0, 2.0})), make_vector({0.0, 1.0}), 0.0);
}

TEST(Project, GraphAgreesWithDenseSampling) {
    const auto g = parabola();
    for (const Vector& x : {make_vector({0.7, 0.3}), make_vector({-0.4, 0.5}), make_vector({0.2, -0.1})}) {
        double best = INFINITY;
        double arg = 0.0;
        for (double t = -2.0; t <= 2.0; t += 1e-5) {
            const double dist = std::hypot(x(0) - t, x(1) - t * t);
            if (dist < best) {
                best = dist;
                arg = t;
            }
        }
        ASSERT_LT(g.distance(x), g.reach());
        const Vector p = g.project(x);
        EXPECT_NEAR(p(0), arg, 1e-4);
        EXPECT_NEAR(p(1), p(0) * p(0), 1e-14);
        EXPECT_NEAR(g.distance(x), best, 1e-9);
    }
}

TEST(Project, OutsideReachIsRejected) {
    const auto s = Hypersurface::sphere(Vector::Zero(2), 1.0);
    try {
        s.project(make_vector({3.0, 0.0}));
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::query_outside_tubular_neighborhood);
    }
    EXPECT_THROW(s.tube_coordinates(Vector::Zero(2)), Error);
}

TEST(Distance, Examples) {
    const auto s = Hypersurface::sphere(Vector::Zero(2), 1.0);
    EXPECT_DOUBLE_EQ(s.distance(Vector::Zero(2)), 1.0);
    const auto ps = Hypersurface::point_set({2.0, -1.0});
    EXPECT_DOUBLE_EQ(ps.distance(make_vector({0.5})), 1.5);
    EXPECT_DOUBLE_EQ(ps.reach(), 1.5);
    for (const Vector& xi : s.sample(16, 3, Vector::Zero(2), Vector::Zero(2))) EXPECT_LE(s.distance(xi), 1e-15);
    EXPECT_EQ(ps.distance(make_vector({2.0})), 0.0);
}

TEST(Normal, Examples) {
    const auto s = Hypersurface::sphere(Vector::Zero(2), 1.0);
    expect_vec_near(s.normal(make_vector({0.0, 1.0})), make_vector({0.0, 1.0}), 0.0);
    const auto g = parabola();
    expect_vec_near(g.normal(make_vector({1.0, 1.0})), make_vector({-2.0, 1.0}) / std::sqrt(5.0), 1e-15);
    const auto p = Hypersurface::hyperplane(make_vector({0.6, 0.8}), 1.0);
    expect_vec_near(p.normal(make_vector({0.6, 0.8})), make_vector({0.6, 0.8}), 1e-15);
    expect_vec_near(Hypersurface::point_set({0.0}).normal(make_vector({0.0})), make_vector({1.0}), 0.0);
}

TEST(Normal, OffSurfaceIsRejected) {
    const auto s = Hypersurface::sphere(Vector::Zero(2), 1.0);
    try {
        s.normal(make_vector({0.0, 1.1}));
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::not_on_surface);
    }
}

TEST(Normal, UnitAndOrthogonalToTangents) {
    const auto s = Hypersurface::sphere(make_vector({1.0, -2.0, 0.5}), 2.0);
    for (const Vector& xi : s.sample(50, 5, Vector(), Vector())) {
        const Vector n = s.normal(xi);
        EXPECT_NEAR(n.norm(), 1.0, 1e-14);
        const Matrix t = s.tangent_basis(xi);
        EXPECT_LE((t.transpose() * n).norm(), 1e-14);
        EXPECT_LE((t.transpose() * t - Matrix::Identity(2, 2)).norm(), 1e-14);
    }
}

TEST(Normal, FlippedOrientation) {
    const auto s = Hypersurface::sphere(Vector::Zero(2), 1.0).with_flipped_orientation();
    expect_vec_near(s.normal(make_vector({1.0, 0.0})), make_vector({-1.0, 0.0}), 0.0);
    EXPECT_EQ(s.side(make_vector({2.0, 0.0})), Side::minus);
    const auto tp = s.tube_coordinates(make_vector({1.5, 0.0}));
    EXPECT_DOUBLE_EQ(tp.offset, -0.5);
}

TEST(Side, TieBreakIsPlus) {
    EXPECT_EQ(Hypersurface::sphere(Vector::Zero(2), 1.0).side(make_vector({0.0, 1.0})), Side::plus);
    EXPECT_EQ(Hypersurface::point_set({0.0}).side(make_vector({0.0})), Side::plus);
    EXPECT_EQ(Hypersurface::point_set({0.0}).side(make_vector({-1e-300})), Side::minus);
}

TEST(NormalDerivative, Examples) {
    const Vector lo = Vector::Constant(3, -3), hi = Vector::Constant(3, 3);
    const auto circle = normal_derivative_bound_check(Hypersurface::sphere(Vector::Zero(2), 1.0), 64, lo.head(2),
                                                      hi.head(2));
    EXPECT_TRUE(circle.pass);
    EXPECT_NEAR(circle.max_observed, 1.0, 1e-6);
    EXPECT_DOUBLE_EQ(circle.bound, 2.0);

    const auto plane = normal_derivative_bound_check(Hypersurface::hyperplane(make_vector({0, 0, 1}), 0), 64, lo, hi);
    EXPECT_TRUE(plane.pass);
    EXPECT_EQ(plane.max_observed, 0.0);

    const auto ball = normal_derivative_bound_check(Hypersurface::sphere(Vector::Zero(3), 2.0), 64, lo, hi);
    EXPECT_TRUE(ball.pass);
    EXPECT_NEAR(ball.max_observed, 0.5, 1e-6);
    EXPECT_DOUBLE_EQ(ball.bound, 2.0);
}

TEST(ShapeOperator, MatchesFiniteDifferenceOfNormal) {
    const auto g = parabola();
    for (double t : {-0.6, 0.0, 0.3, 0.9}) {
        const Vector xi = make_vector({t, t * t});
        const Vector tangent = g.tangent_basis(xi).col(0);
        const double h = 1e-6;
        const Vector xp = g.project(xi + h * tangent), xm = g.project(xi - h * tangent);
        const Vector fd = (g.normal(xp) - g.normal(xm)) / (xp - xm).norm();
        expect_vec_near(g.shape_operator(xi) * tangent, fd * ((xp - xm).dot(tangent) > 0 ? 1.0 : -1.0), 1e-6);
    }
}

TEST(ProjectionJacobian, MatchesFiniteDifferences) {
    const std::vector<Hypersurface> surfaces = {Hypersurface::sphere(make_vector({0.3, -0.2, 0.1}), 1.5), parabola()};
    for (const auto& s : surfaces) {
        const int d = s.dimension();
        const Vector lo = Vector::Constant(d, -0.8), hi = Vector::Constant(d, 0.8);
        SequentialRng rng(2, 2);
        for (const Vector& xi : s.sample(20, 8, lo, hi)) {
            const Vector x = xi + rng.uniform(-0.3, 0.3) * s.normal(xi);
            const Matrix jac = s.projection_jacobian(s.tube_coordinates(x));
            const double h = 1e-4;
            for (int l = 0; l < d; ++l) {
                Vector xp = x, xm = x;
                xp(l) += h;
                xm(l) -= h;
                const Vector fd = (s.project(xp) - s.project(xm)) / (2 * h);
                expect_vec_near(jac.col(l), fd, 1e-6);
            }
        }
    }
}

// Invariants over sampled tube points, for every analytic kind and a graph.
class TubeInvariants : public ::testing::TestWithParam<int> {
protected:
    Hypersurface surface() const {
        switch (GetParam()) {
        case 0: return Hypersurface::point_set({-1.0, 0.5, 3.0});
        case 1: return Hypersurface::hyperplane(make_vector({1.0, -2.0, 0.5}), 0.7);
        case 2: return Hypersurface::sphere(make_vector({0.5, 0.5}), 0.8);
        default: return parabola();
        }
    }
};

TEST_P(TubeInvariants, IdempotencePythagorasAndReconstruction) {
    const auto s = surface();
    const int d = s.dimension();
    const Vector lo = Vector::Constant(d, -1.0), hi = Vector::Constant(d, 1.0);
    const double radius = std::min(s.reach(), 1.0) * 0.99;
    SequentialRng rng(4, 4);
    for (const Vector& xi : s.sample(100, 6, lo, hi)) {
        const Vector n = s.normal(xi);
        const double t = rng.uniform(-radius, radius);
        const Vector x = xi + t * n;
        const TubePoint tp = s.tube_coordinates(x);
        expect_vec_near(tp.foot, xi, 1e-9 * (1 + xi.norm()));
        // Idempotence.
        expect_vec_near(s.project(tp.foot), tp.foot, 1e-9);
        // Pythagoras.
        EXPECT_NEAR((x - tp.foot).norm(), std::abs(tp.offset), 1e-9);
        EXPECT_NEAR(s.distance(x), std::abs(tp.offset), 1e-9);
        // (offset, foot) -> x.
        expect_vec_near(tp.foot + tp.offset * tp.normal, x, 1e-9);
        EXPECT_NEAR(tp.offset, t, 1e-9);
    }
}

TEST_P(TubeInvariants, DeclaredReachPassesClosestPointProbe) {
    const auto s = surface();
    const int d = s.dimension();
    const auto r = unique_closest_point_check(s, 40, Vector::Constant(d, -1), Vector::Constant(d, 1));
    EXPECT_TRUE(r.pass) << r.max_foot_error;
}

INSTANTIATE_TEST_SUITE_P(Kinds, TubeInvariants, ::testing::Values(0, 1, 2, 3));

TEST(ReachProbe, OverstatedReachFails) {
    GraphFunction g;
    g.value = [](const Vector& u) { return u(0) * u(0); };
    g.gradient = [](const Vector& u) { return make_vector({2.0 * u(0)}); };
    g.hessian = [](const Vector&) { return Matrix::Constant(1, 1, 2.0); };
    const auto s = Hypersurface::graph(2, 1, g, 5.0);
    const auto r = unique_closest_point_check(s, 40, Vector::Constant(2, -1), Vector::Constant(2, 1));
    EXPECT_FALSE(r.pass);
}

TEST(Construction, RejectsInvalidDescriptors) {
    EXPECT_THROW(Hypersurface::point_set({}), Error);
    EXPECT_THROW(Hypersurface::point_set({1.0, 1.0}), Error);
    EXPECT_THROW(Hypersurface::sphere(Vector::Zero(2), 0.0), Error);
    EXPECT_THROW(Hypersurface::hyperplane(Vector::Zero(2), 1.0), Error);
    EXPECT_THROW(parabola().distance(make_vector({1.0, 2.0, 3.0})), Error);
}

TEST(Construction, PointSetSortsAndComputesReach) {
    const auto ps = Hypersurface::point_set({3.0, 0.0, 1.0});
    EXPECT_EQ(ps.as_point_set()->points, (std::vector<double>{0.0, 1.0, 3.0}));
    EXPECT_DOUBLE_EQ(ps.reach(), 0.5);
    EXPECT_TRUE(std::isinf(Hypersurface::point_set({2.0}).reach()));
}

} // namespace
