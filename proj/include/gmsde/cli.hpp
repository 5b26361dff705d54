#pragma once

#include "gmsde/checks.hpp"
#include "gmsde/config.hpp"
#include "gmsde/convergence.hpp"
#include "gmsde/examples.hpp"
#include "gmsde/solver.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gmsde::cli {

enum Exit : int {
    ok = 0,
    usage_or_config = 2,
    simulation_failure = 3,
    check_failed = 4,
};

/// One parsed command line.
struct Request {
    std::string command;
    std::string example;
    std::string config_path;
    std::optional<int> levels;
    std::optional<std::int64_t> paths;
    std::optional<std::int64_t> seed;
    std::optional<std::string> methods;
    std::string out;
    std::vector<std::string> overrides;
};

/// Precedence, lowest first: example defaults, config file, --set, flags.
inline Config merged_config(const Request& req) {
    Config cfg;
    if (!req.config_path.empty()) cfg = Config::load(req.config_path);
    for (const auto& kv : req.overrides) cfg.assign(kv);
    if (!req.example.empty()) cfg.set("example.name", req.example);
    if (req.levels) cfg.set("sim.levels", std::to_string(*req.levels));
    if (req.paths) cfg.set("sim.paths", std::to_string(*req.paths));
    if (req.seed) cfg.set("sim.seed", std::to_string(*req.seed));
    if (req.methods) cfg.set("sim.methods", *req.methods);
    return cfg;
}

inline void write_header(std::ostream& os, const std::string& command, const RunSettings& s) {
    os << "# gmsde " << command << '\n';
    for (const auto& [k, v] : s.resolved) os << "# " << k << '=' << v << '\n';
}

namespace detail {

inline Scheme make_scheme(const RunSettings& s, Method m) {
    if (m == Method::em) return Scheme::euler_maruyama(s.bundle.problem);
    auto transform = std::make_shared<const Transform>(s.bundle.problem, s.c, s.bundle.transform_options);
    return Scheme::transformed(std::make_shared<const TransformedSde>(std::move(transform)));
}

/// Writes through `sink` into --out when given, else into `fallback`.
inline void emit(const std::string& path, std::ostream& fallback, const std::function<void(std::ostream&)>& sink) {
    if (path.empty()) {
        sink(fallback);
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::configuration, "cannot write " + path);
    sink(f);
}

} // namespace detail

/// Runs the coupled-ladder study for each requested method. Exit 0 iff the
/// GM slope (when GM is requested) lies inside the configured band.
inline int cmd_convergence(const RunSettings& s, const std::string& out, std::ostream& csv, std::ostream& log) {
    if (s.levels < 2) throw Error(ErrorCode::configuration, "convergence needs sim.levels >= 2");
    MonteCarloSpec spec;
    for (int k = 1; k <= s.levels; ++k) spec.levels.push_back(k);
    spec.paths = s.paths;
    spec.seed = s.seed;
    spec.threads = s.threads;

    std::vector<ConvergenceReport> reports;
    for (Method m : s.methods) {
        const MonteCarloResult mc = run_monte_carlo(detail::make_scheme(s, m), spec);
        const auto terminals = mc.successful();
        ConvergenceReport r = estimate_errors(spec.levels, terminals, s.bundle.problem->horizon);
        r.method = to_string(m);
        r.seed = s.seed;
        if (!mc.failed_paths.empty())
            r.warnings.push_back(std::to_string(mc.failed_paths.size()) + " paths aborted and were dropped");
        reports.push_back(std::move(r));
    }

    detail::emit(out, csv, [&](std::ostream& os) {
        write_header(os, "convergence", s);
        os << "method,level,log2_dt,raw_l2_diff,err_k,mc_stderr\n";
        for (const auto& r : reports)
            for (const auto& rec : r.records)
                os << r.method << ',' << rec.level << ',' << format_double(rec.log2_dt) << ','
                   << format_double(rec.raw_l2_diff) << ',' << format_double(rec.err) << ','
                   << format_double(rec.mc_stderr) << '\n';
    });

    int status = Exit::ok;
    log << s.bundle.name << ": " << s.paths << " paths, levels 1.." << s.levels << ", seed " << s.seed
        << ", c = " << s.c << '\n';
    for (const auto& r : reports) {
        for (const auto& w : r.warnings) log << "  warning (" << r.method << "): " << w << '\n';
        log << "  " << r.method << " slope " << r.fit.slope << " (residual " << r.fit.residual << ")";
        if (r.method == to_string(Method::gm)) {
            const bool inside = r.fit.slope >= s.slope_min && r.fit.slope <= s.slope_max;
            log << (inside ? " inside" : " OUTSIDE") << " [" << s.slope_min << ", " << s.slope_max << "]";
            if (!inside) status = Exit::check_failed;
        }
        log << '\n';
    }
    return status;
}

/// Trajectories (or terminal states) of `paths` paths at level sim.levels
/// with a single method.
inline int cmd_simulate(const RunSettings& s, const std::string& out, std::ostream& csv, std::ostream& log) {
    if (s.methods.size() != 1) throw Error(ErrorCode::configuration, "simulate takes exactly one method");
    const Method method = s.methods.front();
    const Scheme scheme = detail::make_scheme(s, method);
    const auto& problem = *s.bundle.problem;
    const int level = s.levels;

    std::vector<PathResult> results;
    if (s.terminal_only) {
        MonteCarloSpec spec{{level}, s.paths, s.seed, s.threads, 0.0};
        const MonteCarloResult mc = run_monte_carlo(scheme, spec);
        for (std::size_t p = 0; p < s.paths; ++p) {
            PathResult r;
            r.path = p;
            r.terminal = mc.terminals[0].row(static_cast<Eigen::Index>(p)).transpose();
            results.push_back(std::move(r));
        }
    } else {
        for (std::size_t p = 0; p < s.paths; ++p) {
            const BrownianLadder ladder(problem.horizon, level, problem.noise_dim, s.seed, p);
            results.push_back(scheme.simulate(level, ladder, true));
        }
    }

    detail::emit(out, csv, [&](std::ostream& os) {
        write_header(os, "simulate", s);
        os << "path,t";
        for (int i = 1; i <= problem.dim; ++i) os << ",x_" << i;
        os << '\n';
        auto row = [&](std::uint64_t path, double t, const Vector& x) {
            os << path << ',' << format_double(t);
            for (Eigen::Index i = 0; i < x.size(); ++i) os << ',' << format_double(x(i));
            os << '\n';
        };
        for (const auto& r : results) {
            if (s.terminal_only) {
                row(r.path, problem.horizon, r.terminal);
                continue;
            }
            for (std::size_t j = 0; j < r.trajectory.size(); ++j) row(r.path, r.times[j], r.trajectory[j]);
        }
    });
    log << s.bundle.name << ": " << to_string(method) << ", " << s.paths << " paths at level " << level << '\n';
    return Exit::ok;
}

/// Sampled checks of the standing assumptions; exit 0 iff every hard check
/// passes.
inline int cmd_check(const RunSettings& s, const std::string& out, std::ostream& text, std::ostream& log) {
    const auto& problem = *s.bundle.problem;
    std::ostringstream os;
    bool all = true;
    auto line = [&](bool pass, const std::string& name, const std::string& detail) {
        os << (pass ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
        all = all && pass;
    };
    auto guarded = [&](const std::string& name, const std::function<void()>& body) {
        try {
            body();
        } catch (const Error& e) {
            line(false, name, e.what());
        }
    };

    os << "# " << s.bundle.name << ", c = " << format_double(s.c) << '\n';
    guarded("non-parallelity", [&] {
        const auto r = check_non_parallelity(problem);
        line(r.pass, "non-parallelity",
             "min |sigma^T n| = " + format_double(r.min_norm) + " vs c0 = " + format_double(r.threshold));
    });
    guarded("normal derivative", [&] {
        const auto r = normal_derivative_bound_check(problem.surface, 128, problem.box_lo, problem.box_hi);
        line(r.pass, "normal derivative",
             "max |n'| = " + format_double(r.max_observed) + " vs 2(d-1)/reach = " + format_double(r.bound));
    });
    guarded("unique closest point", [&] {
        const auto r = unique_closest_point_check(problem.surface, 64, problem.box_lo, problem.box_hi);
        line(r.pass, "unique closest point",
             std::to_string(r.probes) + " probes within " + format_double(r.radius) +
                 ", max foot error " + format_double(r.max_foot_error));
    });
    guarded("admissibility", [&] {
        const auto r = check_admissibility(problem, s.c, s.bundle.transform_options);
        for (const auto& w : r.warnings) os << "WARN admissibility: " << w << '\n';
        std::string detail = "reach " + format_double(problem.surface.reach()) + ", geometric term " +
                             format_double(r.bound.geometric_term);
        if (r.tube_samples > 0) detail += ", min det G' = " + format_double(r.min_det);
        line(r.pass, "admissibility", detail);
    });
    guarded("transformed drift continuity", [&] {
        auto transform = std::make_shared<const Transform>(s.bundle.problem, s.c, s.bundle.transform_options);
        const TransformedSde sde(transform);
        const auto r = check_transformed_drift_continuity(sde);
        double worst_ratio_lo = std::numeric_limits<double>::infinity(), worst_ratio_hi = 0.0;
        for (const auto& p : r.probes)
            if (p.jump > 1e-12)
                for (double q : p.ratio) {
                    worst_ratio_lo = std::min(worst_ratio_lo, q);
                    worst_ratio_hi = std::max(worst_ratio_hi, q);
                }
        std::string detail = std::to_string(r.probes.size()) + " probes at h = " + format_double(r.offsets[0]) +
                             ", " + format_double(r.offsets[1]) + ", " + format_double(r.offsets[2]);
        if (worst_ratio_hi > 0.0)
            detail += "; gap ratios in [" + format_double(worst_ratio_lo) + ", " + format_double(worst_ratio_hi) + "]";
        line(r.pass, "transformed drift continuity", detail);
    });
    try {
        const auto r = check_drift_piecewise_lipschitz(problem);
        os << "INFO drift Lipschitz estimate: minus side " << format_double(r.minus_side) << ", plus side "
           << format_double(r.plus_side) << '\n';
        os << "INFO sigma Lipschitz estimate: " << format_double(check_sigma_lipschitz(problem, 2000)) << '\n';
    } catch (const Error& e) {
        os << "INFO Lipschitz estimates unavailable: " << e.what() << '\n';
    }

    detail::emit(out, text, [&](std::ostream& f) { f << os.str(); });
    log << s.bundle.name << ": " << (all ? "all hard checks pass" : "hard check failed") << '\n';
    return all ? Exit::ok : Exit::check_failed;
}

/// Resolves the request and dispatches; maps errors onto exit codes.
inline int run(const Request& req, std::ostream& out, std::ostream& log) {
    RunSettings settings;
    try {
        if (req.command != "convergence" && req.command != "simulate" && req.command != "check")
            throw Error(ErrorCode::configuration, "unknown command '" + req.command + "'");
        Config cfg = merged_config(req);
        if (req.command == "simulate" && !cfg.has("sim.methods")) cfg.set("sim.methods", "gm");
        settings = resolve(cfg);
    } catch (const Error& e) {
        log << "error: " << e.what() << '\n';
        return Exit::usage_or_config;
    }
    try {
        if (req.command == "convergence") return cmd_convergence(settings, req.out, out, log);
        if (req.command == "simulate") return cmd_simulate(settings, req.out, out, log);
        return cmd_check(settings, req.out, out, log);
    } catch (const Error& e) {
        log << "error: " << e.what() << '\n';
        if (e.code() == ErrorCode::configuration || e.code() == ErrorCode::invalid_argument ||
            e.code() == ErrorCode::insufficient_levels)
            return Exit::usage_or_config;
        return Exit::simulation_failure;
    }
}

} // namespace gmsde::cli
