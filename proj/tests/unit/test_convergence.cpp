#include "gmsde/convergence.hpp"
#include "gmsde/examples.hpp"
#include "gmsde/solver.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace {

using namespace gmsde;

/// Terminal arrays whose consecutive L2 differences scale like 2^(-rate k).
std::vector<Eigen::MatrixXd> synthetic_ladder(int levels, double rate, Eigen::Index paths = 4) {
    std::vector<Eigen::MatrixXd> out;
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(paths, 2);
    for (int k = 0; k < levels; ++k) {
        if (k > 0) x.col(0).array() += std::exp2(-rate * k);
        out.push_back(x);
    }
    return out;
}

std::vector<int> iota_levels(int first, int count) {
    std::vector<int> v(static_cast<std::size_t>(count));
    std::iota(v.begin(), v.end(), first);
    return v;
}

TEST(FitLine, ExactLines) {
    const std::vector<double> xs = {-1, -2, -3, -4, -5};
    std::vector<double> half, one;
    for (double x : xs) {
        half.push_back(0.5 * x + 1.0);
        one.push_back(x - 2.0);
    }
    const auto a = fit_line(xs, half);
    EXPECT_NEAR(a.slope, 0.5, 1e-15);
    EXPECT_NEAR(a.intercept, 1.0, 1e-14);
    EXPECT_NEAR(a.residual, 0.0, 1e-15);
    EXPECT_NEAR(fit_line(xs, one).slope, 1.0, 1e-15);
}

TEST(FitLine, Errors) {
    const std::vector<double> two = {1, 2};
    EXPECT_THROW(fit_line(two, two), Error);
    const std::vector<double> flat = {1, 1, 1}, ys = {1, 2, 3};
    try {
        fit_line(flat, ys);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::degenerate_design);
    }
}

TEST(EstimateErrors, HalvingMeanSquareGivesSlopeOneHalf) {
    const auto levels = iota_levels(1, 10);
    const auto report = estimate_errors(levels, synthetic_ladder(10, 0.5));
    ASSERT_EQ(report.records.size(), 9u);
    EXPECT_NEAR(report.records.front().err, std::sqrt(0.5), 1e-14);
    for (std::size_t i = 1; i < report.records.size(); ++i)
        EXPECT_NEAR(report.records[i - 1].err - report.records[i].err, 0.5, 1e-12);
    EXPECT_NEAR(report.fit.slope, 0.5, 1e-12);
    EXPECT_NEAR(report.fit.residual, 0.0, 1e-12);
}

TEST(EstimateErrors, HalvingRawDifferenceDropsErrByOne) {
    const auto report = estimate_errors(iota_levels(1, 6), synthetic_ladder(6, 1.0));
    for (std::size_t i = 1; i < report.records.size(); ++i)
        EXPECT_NEAR(report.records[i - 1].err - report.records[i].err, 1.0, 1e-12);
    EXPECT_NEAR(report.fit.slope, 1.0, 1e-12);
}

TEST(EstimateErrors, LogStepUsesTheHorizon) {
    const auto report = estimate_errors(iota_levels(3, 4), synthetic_ladder(4, 0.5), 4.0);
    EXPECT_EQ(report.records.front().level, 4);
    EXPECT_DOUBLE_EQ(report.records.front().log2_dt, 2.0 - 4.0);
}

TEST(EstimateErrors, DegenerateRunIsFlagged) {
    const std::vector<Eigen::MatrixXd> flat(5, Eigen::MatrixXd::Ones(8, 2));
    const auto report = estimate_errors(iota_levels(1, 5), flat);
    EXPECT_TRUE(report.degenerate);
    EXPECT_FALSE(report.warnings.empty());
    for (const auto& r : report.records) {
        EXPECT_TRUE(r.degenerate);
        EXPECT_TRUE(std::isnan(r.err));
    }
}

TEST(EstimateErrors, Errors) {
    const auto ladder = synthetic_ladder(3, 0.5);
    const std::vector<int> one = {1};
    EXPECT_THROW(estimate_errors(one, std::span(ladder).first(1)), Error);
    const std::vector<int> gap = {1, 3, 4};
    EXPECT_THROW(estimate_errors(gap, ladder), Error);
    auto uneven = ladder;
    uneven[2] = Eigen::MatrixXd::Zero(3, 2);
    try {
        estimate_errors(iota_levels(1, 3), uneven);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::mismatched_path_counts);
    }
}

TEST(EstimateErrors, RenormalizationKeepsTheSlope) {
    const auto b = build_1d_reference();
    const auto mc = run_monte_carlo(Scheme::transformed(make_transformed_sde(b)),
                                    MonteCarloSpec{iota_levels(1, 8), 64, 3, 1});
    const auto report = estimate_errors(mc.levels, mc.terminals);
    for (double factor : {1e-3, 0.5, 3.0, 1e4}) {
        const auto scaled = renormalized(report, factor);
        EXPECT_NEAR(scaled.fit.slope, report.fit.slope, 1e-12);
        EXPECT_NEAR(scaled.records[2].err - report.records[2].err, std::log2(factor), 1e-12);
    }
    EXPECT_THROW(renormalized(report, 0.0), Error);
}

TEST(EstimateErrors, PathOrderDoesNotMatter) {
    const auto b = build_unit_circle();
    const auto mc = run_monte_carlo(Scheme::euler_maruyama(b.problem), MonteCarloSpec{iota_levels(1, 6), 50, 4, 1});
    std::vector<Eigen::Index> order(50);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), std::mt19937(11));
    std::vector<Eigen::MatrixXd> permuted;
    for (const auto& level : mc.terminals) {
        Eigen::MatrixXd m(level.rows(), level.cols());
        for (Eigen::Index r = 0; r < level.rows(); ++r) m.row(r) = level.row(order[static_cast<std::size_t>(r)]);
        permuted.push_back(m);
    }
    const auto a = estimate_errors(mc.levels, mc.terminals);
    const auto p = estimate_errors(mc.levels, permuted);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        EXPECT_EQ(a.records[i].raw_l2_diff, p.records[i].raw_l2_diff);
        EXPECT_EQ(a.records[i].err, p.records[i].err);
        EXPECT_EQ(a.records[i].mc_stderr, p.records[i].mc_stderr);
    }
    EXPECT_EQ(a.fit.slope, p.fit.slope);
}

TEST(EstimateErrors, DoublingPathsStaysWithinStandardErrors) {
    const auto b = build_1d_reference();
    const auto gm = Scheme::transformed(make_transformed_sde(b));
    const auto levels = iota_levels(1, 8);
    const auto small = run_monte_carlo(gm, MonteCarloSpec{levels, 512, 9, 1});
    const auto big = run_monte_carlo(gm, MonteCarloSpec{levels, 1024, 9, 1});
    const auto a = estimate_errors(levels, small.terminals);
    const auto c = estimate_errors(levels, big.terminals);
    // Compare on a common normalization so that only the estimates differ.
    const auto aligned = renormalized(c, a.norm_const / c.norm_const);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        const double se = std::hypot(a.records[i].mc_stderr, aligned.records[i].mc_stderr);
        EXPECT_LE(std::abs(a.records[i].err - aligned.records[i].err), 3.0 * se) << "level " << a.records[i].level;
    }
}

} // namespace
