#pragma once

#include "gmsde/brownian.hpp"
#include "gmsde/sde.hpp"
#include "gmsde/transformed_sde.hpp"
#include "gmsde/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace gmsde {

enum class Method { em, gm };

inline std::string to_string(Method m) { return m == Method::em ? "EM" : "GM"; }

struct PathResult {
    Vector terminal;
    /// Time stamps and states, filled only when a trajectory was requested.
    std::vector<double> times;
    std::vector<Vector> trajectory;
    int level = 0;
    std::uint64_t path = 0;
    Method method = Method::em;
};

/// state + drift dt + diffusion dW.
inline Vector em_step(const Vector& state, const Vector& drift, const Matrix& diffusion, double dt, const Vector& dw) {
    if (!(dt > 0.0)) throw Error(ErrorCode::invalid_argument, "time step must be positive");
    Vector next = state + drift * dt + diffusion * dw;
    if (!next.allFinite()) throw Error(ErrorCode::non_finite_state, "Euler step produced a non-finite state");
    return next;
}

namespace detail {

template <typename Coefficients>
Vector run_em(const SdeProblem& problem, Vector state, int level, const BrownianLadder& ladder, PathResult* record,
              Coefficients&& coefficients) {
    const std::size_t n = BrownianLadder::steps(level);
    const double dt = ladder.step_size(level);
    const auto inc = ladder.increments(level);
    const int m = problem.noise_dim;
    if (ladder.noise_dim() != m) throw Error(ErrorCode::invalid_argument, "ladder noise dimension mismatch");
    if (record) {
        record->times.reserve(n + 1);
        record->trajectory.reserve(n + 1);
        record->times.push_back(0.0);
        record->trajectory.push_back(state);
    }
    Vector dw(m);
    Vector drift;
    Matrix diffusion;
    for (std::size_t s = 0; s < n; ++s) {
        for (int j = 0; j < m; ++j) dw(j) = inc[s * m + j];
        coefficients(state, drift, diffusion);
        state = em_step(state, drift, diffusion, dt, dw);
        if (problem.state_constraint) problem.state_constraint(state);
        if (record) {
            record->times.push_back(s + 1 == n ? ladder.horizon() : static_cast<double>(s + 1) * dt);
            record->trajectory.push_back(state);
        }
    }
    return state;
}

} // namespace detail

/// Euler-Maruyama on the original (discontinuous) coefficients.
inline PathResult simulate_em(const SdeProblem& problem, int level, const BrownianLadder& ladder,
                              bool keep_trajectory = false) {
    PathResult out;
    out.level = level;
    out.path = ladder.path();
    out.method = Method::em;
    out.terminal = detail::run_em(problem, problem.x0, level, ladder, keep_trajectory ? &out : nullptr,
                                  [&](const Vector& x, Vector& mu, Matrix& sigma) {
                                      mu = problem.drift(x);
                                      sigma = problem.diffusion(x);
                                  });
    return out;
}

/// Transform, simulate, invert: Z_0 = G(x0), Euler-Maruyama on the
/// transformed coefficients, X = G^{-1}(Z_T). A stored trajectory is mapped
/// back through G^{-1} step by step.
inline PathResult simulate_gm(const TransformedSde& sde, int level, const BrownianLadder& ladder,
                              bool keep_trajectory = false) {
    const auto& problem = sde.problem();
    const auto& transform = sde.transform();
    PathResult out;
    out.level = level;
    out.path = ladder.path();
    out.method = Method::gm;
    const Vector z0 = transform.value(problem.x0);
    const Vector z = detail::run_em(problem, z0, level, ladder, keep_trajectory ? &out : nullptr,
                                    [&](const Vector& state, Vector& mu, Matrix& sigma) {
                                        auto c = sde.coefficients(state);
                                        mu = std::move(c.drift);
                                        sigma = std::move(c.diffusion);
                                    });
    out.terminal = transform.inverse(z);
    for (auto& state : out.trajectory) state = transform.inverse(state);
    return out;
}

/// One of the two schemes bound to its problem.
class Scheme {
public:
    static Scheme euler_maruyama(std::shared_ptr<const SdeProblem> problem) {
        if (!problem) throw Error(ErrorCode::invalid_argument, "scheme needs a problem");
        validate(*problem);
        Scheme s;
        s.problem_ = std::move(problem);
        s.method_ = Method::em;
        return s;
    }

    static Scheme transformed(std::shared_ptr<const TransformedSde> sde) {
        if (!sde) throw Error(ErrorCode::invalid_argument, "scheme needs a transformed SDE");
        Scheme s;
        s.problem_ = sde->transform().problem_ptr();
        s.sde_ = std::move(sde);
        s.method_ = Method::gm;
        return s;
    }

    Method method() const noexcept { return method_; }
    const SdeProblem& problem() const noexcept { return *problem_; }

    PathResult simulate(int level, const BrownianLadder& ladder, bool keep_trajectory = false) const {
        return method_ == Method::em ? simulate_em(*problem_, level, ladder, keep_trajectory)
                                     : simulate_gm(*sde_, level, ladder, keep_trajectory);
    }

private:
    Scheme() = default;
    std::shared_ptr<const SdeProblem> problem_;
    std::shared_ptr<const TransformedSde> sde_;
    Method method_ = Method::em;
};

struct MonteCarloSpec {
    std::vector<int> levels;
    std::size_t paths = 1;
    std::uint64_t seed = 0;
    /// Worker threads; 0 means hardware concurrency. Output does not depend on it.
    unsigned threads = 0;
    /// Largest tolerated fraction of aborted paths.
    double failure_budget = 1e-3;
};

/// Terminal states of every path at every requested level.
struct MonteCarloResult {
    Method method = Method::em;
    std::vector<int> levels;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    /// One paths x d matrix per level; rows of failed paths are NaN.
    std::vector<Eigen::MatrixXd> terminals;
    std::vector<std::uint64_t> failed_paths;
    std::vector<std::string> failure_messages;

    /// Terminal arrays restricted to the paths that completed.
    std::vector<Eigen::MatrixXd> successful() const {
        std::vector<Eigen::MatrixXd> out;
        if (failed_paths.empty()) return terminals;
        std::vector<Eigen::Index> keep;
        for (std::size_t p = 0; p < paths; ++p)
            if (!std::binary_search(failed_paths.begin(), failed_paths.end(), p))
                keep.push_back(static_cast<Eigen::Index>(p));
        for (const auto& level : terminals) {
            Eigen::MatrixXd m(static_cast<Eigen::Index>(keep.size()), level.cols());
            for (std::size_t r = 0; r < keep.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = level.row(keep[r]);
            out.push_back(std::move(m));
        }
        return out;
    }
};

/// Simulates `paths` independent paths, each at every requested level on one
/// coupled Brownian ladder keyed by (seed, path index). Paths run on a worker
/// pool and are stored by index, so the result is bitwise reproducible and
/// independent of the number of workers.
inline MonteCarloResult run_monte_carlo(const Scheme& scheme, const MonteCarloSpec& spec) {
    if (spec.levels.empty()) throw Error(ErrorCode::insufficient_levels, "no levels requested");
    if (spec.paths == 0) throw Error(ErrorCode::invalid_argument, "at least one path required");
    const auto& problem = scheme.problem();
    const int finest = *std::max_element(spec.levels.begin(), spec.levels.end());
    if (*std::min_element(spec.levels.begin(), spec.levels.end()) < 0)
        throw Error(ErrorCode::invalid_argument, "levels must be nonnegative");

    MonteCarloResult out;
    out.method = scheme.method();
    out.levels = spec.levels;
    out.paths = spec.paths;
    out.seed = spec.seed;
    const auto rows = static_cast<Eigen::Index>(spec.paths);
    for (std::size_t l = 0; l < spec.levels.size(); ++l)
        out.terminals.emplace_back(Eigen::MatrixXd::Constant(rows, problem.dim, std::nan("")));

    std::vector<std::string> failure(spec.paths);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t p = next++; p < spec.paths; p = next++) {
            try {
                const BrownianLadder ladder(problem.horizon, finest, problem.noise_dim, spec.seed, p);
                std::vector<Vector> terminal;
                terminal.reserve(spec.levels.size());
                for (int level : spec.levels) terminal.push_back(scheme.simulate(level, ladder).terminal);
                for (std::size_t l = 0; l < terminal.size(); ++l)
                    out.terminals[l].row(static_cast<Eigen::Index>(p)) = terminal[l].transpose();
            } catch (const Error& e) {
                failure[p] = e.what();
            }
        }
    };
    unsigned threads = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, spec.paths));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    for (std::size_t p = 0; p < spec.paths; ++p) {
        if (failure[p].empty()) continue;
        out.failed_paths.push_back(p);
        out.failure_messages.push_back(failure[p]);
    }
    if (static_cast<double>(out.failed_paths.size()) > spec.failure_budget * static_cast<double>(spec.paths))
        throw Error(ErrorCode::failure_budget_exceeded,
                    std::to_string(out.failed_paths.size()) + " of " + std::to_string(spec.paths) +
                        " paths aborted; first: " + out.failure_messages.front());
    return out;
}

} // namespace gmsde
