#pragma once

#include "gmsde/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace gmsde {

struct LevelError {
    int level = 0;
    /// log2 of the step size T 2^-level.
    double log2_dt = 0.0;
    /// Root of the sample mean of |X^(k) - X^(k-1)|^2.
    double raw_l2_diff = 0.0;
    /// log2(norm_const * raw_l2_diff); NaN for degenerate levels.
    double err = std::numeric_limits<double>::quiet_NaN();
    /// Monte Carlo standard error of err (delta method).
    double mc_stderr = std::numeric_limits<double>::quiet_NaN();
    bool degenerate = false;
};

struct OrderFit {
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
    /// Root mean square of the least-squares residuals.
    double residual = std::numeric_limits<double>::quiet_NaN();
    std::size_t points = 0;
};

/// Error estimates err_k over a coupled ladder and the fitted empirical
/// strong order.
struct ConvergenceReport {
    std::vector<LevelError> records;
    double norm_const = 1.0;
    OrderFit fit;
    std::string method;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    /// True when no level produced a nonzero difference.
    bool degenerate = false;
    std::vector<std::string> warnings;
};

/// Ordinary least squares of ys on xs.
inline OrderFit fit_line(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw Error(ErrorCode::invalid_argument, "fit needs paired samples");
    if (xs.size() < 3) throw Error(ErrorCode::insufficient_levels, "fit needs at least three finite points");
    const auto n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (!(sxx > 0.0)) throw Error(ErrorCode::degenerate_design, "all abscissae are equal");
    OrderFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (f.intercept + f.slope * xs[i]);
        rss += r * r;
    }
    f.residual = std::sqrt(rss / n);
    f.points = xs.size();
    return f;
}

/// Least-squares slope of err_k against log2 dt over the non-degenerate levels.
inline OrderFit fit_order(const ConvergenceReport& report) {
    std::vector<double> xs, ys;
    for (const auto& r : report.records) {
        if (r.degenerate || !std::isfinite(r.err)) continue;
        xs.push_back(r.log2_dt);
        ys.push_back(r.err);
    }
    return fit_line(xs, ys);
}

namespace detail {

/// Sum independent of the order of the inputs: sorts before accumulating.
inline double order_free_sum(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

} // namespace detail

/// err_k = log2(norm_const * sqrt(mean_paths |X^(k) - X^(k-1)|^2)) for every
/// level with a predecessor, with norm_const chosen so that the first
/// non-degenerate entry equals sqrt(1/2). `terminals[i]` holds the paths x d
/// terminal states at `levels[i]`; levels must be consecutive and ascending.
inline ConvergenceReport estimate_errors(std::span<const int> levels, std::span<const Eigen::MatrixXd> terminals,
                                         double horizon = 1.0) {
    if (levels.size() != terminals.size())
        throw Error(ErrorCode::invalid_argument, "one terminal array per level required");
    if (levels.size() < 2) throw Error(ErrorCode::insufficient_levels, "at least two levels required");
    for (std::size_t i = 1; i < levels.size(); ++i) {
        if (levels[i] != levels[i - 1] + 1)
            throw Error(ErrorCode::invalid_argument, "levels must be consecutive and ascending");
        if (terminals[i].rows() != terminals[0].rows() || terminals[i].cols() != terminals[0].cols())
            throw Error(ErrorCode::mismatched_path_counts, "terminal arrays differ in shape");
    }
    const auto paths = terminals[0].rows();
    if (paths < 1) throw Error(ErrorCode::mismatched_path_counts, "no paths");

    ConvergenceReport report;
    report.paths = static_cast<std::size_t>(paths);
    std::vector<double> mean_sq(levels.size(), 0.0);
    std::vector<double> se_sq(levels.size(), 0.0);
    for (std::size_t i = 1; i < levels.size(); ++i) {
        std::vector<double> sq(static_cast<std::size_t>(paths));
        for (Eigen::Index p = 0; p < paths; ++p)
            sq[static_cast<std::size_t>(p)] = (terminals[i].row(p) - terminals[i - 1].row(p)).squaredNorm();
        const double mean = detail::order_free_sum(sq) / static_cast<double>(paths);
        std::vector<double> dev(sq.size());
        for (std::size_t p = 0; p < sq.size(); ++p) dev[p] = (sq[p] - mean) * (sq[p] - mean);
        const double var = paths > 1 ? detail::order_free_sum(dev) / static_cast<double>(paths - 1) : 0.0;
        mean_sq[i] = mean;
        se_sq[i] = std::sqrt(var / static_cast<double>(paths));

        LevelError rec;
        rec.level = levels[i];
        rec.log2_dt = std::log2(horizon) - levels[i];
        rec.raw_l2_diff = std::sqrt(mean);
        rec.degenerate = !(mean > 0.0) || !std::isfinite(mean);
        report.records.push_back(rec);
    }

    const auto first = std::find_if(report.records.begin(), report.records.end(),
                                    [](const LevelError& r) { return !r.degenerate; });
    if (first == report.records.end()) {
        report.degenerate = true;
        report.warnings.push_back("all level differences vanish; nothing to fit");
        return report;
    }
    report.norm_const = std::exp2(std::sqrt(0.5)) / first->raw_l2_diff;
    for (std::size_t i = 0; i < report.records.size(); ++i) {
        auto& rec = report.records[i];
        if (rec.degenerate) {
            report.warnings.push_back("level " + std::to_string(rec.level) + " has zero difference; excluded");
            continue;
        }
        rec.err = std::log2(report.norm_const * rec.raw_l2_diff);
        rec.mc_stderr = se_sq[i + 1] / (2.0 * mean_sq[i + 1] * std::log(2.0));
    }
    std::size_t finite = 0;
    for (const auto& r : report.records) finite += r.degenerate ? 0 : 1;
    if (finite >= 3) report.fit = fit_order(report);
    else report.warnings.push_back("fewer than three non-degenerate levels; no slope fitted");
    return report;
}

/// The same report with norm_const multiplied by `factor`; only err shifts.
inline ConvergenceReport renormalized(ConvergenceReport report, double factor) {
    if (!(factor > 0.0)) throw Error(ErrorCode::invalid_argument, "normalization factor must be positive");
    report.norm_const *= factor;
    for (auto& r : report.records)
        if (!r.degenerate) r.err = std::log2(report.norm_const * r.raw_l2_diff);
    if (report.fit.points >= 3) report.fit = fit_order(report);
    return report;
}

} // namespace gmsde
