#include "gmsde/examples.hpp"
#include "gmsde/solver.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <limits>

namespace {

using namespace gmsde;

/// Jump-free problem on R^d with the given coefficients.
std::shared_ptr<const SdeProblem> smooth_problem(int d, std::function<Vector(const Vector&)> mu,
                                                 std::function<Matrix(const Vector&)> sigma, Vector x0) {
    SdeProblem p;
    p.name = "smooth";
    p.dim = d;
    p.noise_dim = d;
    p.surface = d == 1 ? Hypersurface::point_set({0.0}) : Hypersurface::hyperplane(Vector::Unit(d, 0), 0.0);
    p.drift_branch = [mu](const Vector& x, Side) { return mu(x); };
    p.diffusion = std::move(sigma);
    p.x0 = std::move(x0);
    p.box_lo = Vector::Constant(d, -1.0);
    p.box_hi = Vector::Constant(d, 1.0);
    return std::make_shared<const SdeProblem>(std::move(p));
}

double l2_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return std::sqrt((a - b).rowwise().squaredNorm().mean());
}

TEST(EmStep, Examples) {
    const Vector one = make_vector({1.0});
    EXPECT_EQ(em_step(one, Vector::Zero(1), Matrix::Zero(1, 1), 0.3, make_vector({0.7})), one);
    EXPECT_DOUBLE_EQ(em_step(one, make_vector({-1.0}), Matrix::Zero(1, 1), 0.25, make_vector({0.4}))(0), 0.75);
    const Vector two = em_step(Vector::Zero(2), make_vector({1.0, 2.0}), Matrix::Identity(2, 2), 0.5,
                               make_vector({0.1, -0.2}));
    EXPECT_NEAR(two(0), 0.6, 1e-15);
    EXPECT_NEAR(two(1), 0.8, 1e-15);
}

TEST(EmStep, Errors) {
    const Vector x = make_vector({1.0});
    EXPECT_THROW(em_step(x, x, Matrix::Identity(1, 1), 0.0, x), Error);
    try {
        em_step(x, make_vector({std::numeric_limits<double>::infinity()}), Matrix::Identity(1, 1), 0.1, x);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::non_finite_state);
    }
}

TEST(SimulateEm, FrozenDynamics) {
    const auto p = smooth_problem(
        2, [](const Vector& x) { return Vector::Zero(x.size()); }, [](const Vector&) { return Matrix::Zero(2, 2); },
        make_vector({0.3, -0.4}));
    const BrownianLadder ladder(1.0, 6, 2, 1, 0);
    EXPECT_EQ(simulate_em(*p, 6, ladder).terminal, p->x0);
}

TEST(SimulateEm, DeterministicDecay) {
    const auto p = smooth_problem(
        1, [](const Vector& x) { return Vector(-x); }, [](const Vector&) { return Matrix::Zero(1, 1); },
        make_vector({1.0}));
    const BrownianLadder ladder(1.0, 16, 1, 1, 0);
    EXPECT_NEAR(simulate_em(*p, 16, ladder).terminal(0), std::exp(-1.0), 1e-4);
}

TEST(SimulateEm, OrnsteinUhlenbeckMean) {
    const auto p = smooth_problem(
        1, [](const Vector& x) { return Vector(-x); }, [](const Vector&) { return Matrix::Identity(1, 1); },
        make_vector({1.0}));
    MonteCarloSpec spec{{10}, 10000, 3, 1, 0.0};
    const auto mc = run_monte_carlo(Scheme::euler_maruyama(p), spec);
    const Eigen::VectorXd x = mc.terminals[0].col(0);
    const double mean = x.mean();
    const double se = std::sqrt((x.array() - mean).square().sum() / (x.size() - 1) / x.size());
    EXPECT_LE(std::abs(mean - std::exp(-1.0)), 3.0 * se);
}

TEST(SimulateGm, TrajectoryIsInvertedStepByStep) {
    const auto b = build_unit_circle();
    const auto sde = make_transformed_sde(b);
    const BrownianLadder ladder(1.0, 8, 2, 7, 3);
    const PathResult r = simulate_gm(*sde, 8, ladder, true);
    ASSERT_EQ(r.trajectory.size(), 257u);
    ASSERT_EQ(r.times.size(), 257u);
    EXPECT_EQ(r.times.front(), 0.0);
    EXPECT_EQ(r.times.back(), 1.0);
    EXPECT_EQ(r.trajectory.back(), r.terminal);
    EXPECT_LE((r.trajectory.front() - b.problem->x0).norm(), 1e-12);
    EXPECT_EQ(simulate_gm(*sde, 8, ladder).terminal, r.terminal);
}

TEST(SimulateGm, NoJumpMatchesEmBitwise) {
    const auto b = build_unit_circle(UnitCircleVariant::smooth);
    const auto gm = Scheme::transformed(make_transformed_sde(b));
    const auto em = Scheme::euler_maruyama(b.problem);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        MonteCarloSpec spec{{4, 7}, 10, seed, 1};
        const auto a = run_monte_carlo(gm, spec);
        const auto e = run_monte_carlo(em, spec);
        for (std::size_t l = 0; l < 2; ++l) EXPECT_TRUE((a.terminals[l].array() == e.terminals[l].array()).all());
    }
}

TEST(MonteCarlo, CouplingTelescope) {
    const auto p = smooth_problem(
        2, [](const Vector& x) { return Vector::Zero(x.size()); }, [](const Vector&) { return Matrix::Identity(2, 2); },
        make_vector({0.5, -1.0}));
    MonteCarloSpec spec{{0, 1, 2, 3, 4, 5, 6, 7, 8}, 1, 17, 1};
    const auto mc = run_monte_carlo(Scheme::euler_maruyama(p), spec);
    const BrownianLadder ladder(1.0, 8, 2, 17, 0);
    const auto w = ladder.increments(0);
    const Eigen::RowVector2d expected(0.5 + w[0], -1.0 + w[1]);
    for (const auto& level : mc.terminals) EXPECT_LE((level.row(0) - expected).norm(), 1e-13);
}

TEST(MonteCarlo, DeterministicAndThreadIndependent) {
    const auto b = build_unit_circle();
    const auto gm = Scheme::transformed(make_transformed_sde(b));
    MonteCarloSpec spec{{2, 3, 4, 5}, 24, 5, 1};
    const auto one = run_monte_carlo(gm, spec);
    const auto again = run_monte_carlo(gm, spec);
    spec.threads = 3;
    const auto three = run_monte_carlo(gm, spec);
    for (std::size_t l = 0; l < spec.levels.size(); ++l) {
        EXPECT_TRUE((one.terminals[l].array() == again.terminals[l].array()).all());
        EXPECT_TRUE((one.terminals[l].array() == three.terminals[l].array()).all());
    }
}

TEST(MonteCarlo, FailureBudget) {
    // The drift blows up beyond x = 2, which a few percent of paths reach.
    const auto p = smooth_problem(
        1, [](const Vector& x) { return make_vector({x(0) > 2.0 ? std::numeric_limits<double>::infinity() : 0.0}); },
        [](const Vector&) { return Matrix::Identity(1, 1); }, make_vector({0.0}));
    const auto scheme = Scheme::euler_maruyama(p);
    MonteCarloSpec spec{{6}, 400, 2, 1};
    try {
        run_monte_carlo(scheme, spec);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::failure_budget_exceeded);
    }
    spec.failure_budget = 1.0;
    const auto mc = run_monte_carlo(scheme, spec);
    ASSERT_FALSE(mc.failed_paths.empty());
    const auto ok = mc.successful();
    EXPECT_EQ(static_cast<std::size_t>(ok[0].rows()), spec.paths - mc.failed_paths.size());
    EXPECT_TRUE(ok[0].allFinite());
    EXPECT_TRUE(std::isnan(mc.terminals[0](static_cast<Eigen::Index>(mc.failed_paths.front()), 0)));
}

TEST(MonteCarlo, RejectsBadSpecs) {
    const auto scheme = Scheme::euler_maruyama(build_unit_circle().problem);
    EXPECT_THROW(run_monte_carlo(scheme, MonteCarloSpec{{}, 4, 1, 1}), Error);
    EXPECT_THROW(run_monte_carlo(scheme, MonteCarloSpec{{3}, 0, 1, 1}), Error);
    EXPECT_THROW(run_monte_carlo(scheme, MonteCarloSpec{{-1, 2}, 4, 1, 1}), Error);
}

TEST(SelfConsistency, UnitCircleLadder) {
    const auto b = build_unit_circle();
    const auto gm = Scheme::transformed(make_transformed_sde(b));
    const auto mc = run_monte_carlo(gm, MonteCarloSpec{{6, 12, 16}, 48, 7, 1});
    EXPECT_LE(l2_distance(mc.terminals[1], mc.terminals[2]), l2_distance(mc.terminals[0], mc.terminals[2]));
}

TEST(SelfConsistency, OneDimensionalLadder) {
    const auto b = build_1d_reference();
    const auto gm = Scheme::transformed(make_transformed_sde(b));
    const auto mc = run_monte_carlo(gm, MonteCarloSpec{{8, 14, 16}, 128, 7, 1});
    EXPECT_LT(l2_distance(mc.terminals[1], mc.terminals[2]), l2_distance(mc.terminals[0], mc.terminals[2]));
}

TEST(Cost, LinearInTheNumberOfSteps) {
    const auto b = build_unit_circle();
    const auto gm = Scheme::transformed(make_transformed_sde(b));
    auto best_time = [&](int level) {
        double best = std::numeric_limits<double>::infinity();
        for (int rep = 0; rep < 3; ++rep) {
            const auto start = std::chrono::steady_clock::now();
            run_monte_carlo(gm, MonteCarloSpec{{level}, 16, 3, 1});
            best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        }
        return best;
    };
    const double coarse = best_time(10);
    const double fine = best_time(11);
    EXPECT_LE(fine, 2.5 * coarse) << coarse << " s vs " << fine << " s";
}

} // namespace
