#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace gmsde {

/// Largest supported state dimension. Vectors and matrices keep their storage
/// inline up to this size, so the simulation hot loop never touches the heap.
inline constexpr int kMaxDim = 8;

using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

/// Side of the exceptional surface a point belongs to. Points exactly on the
/// surface are classified as `plus`.
enum class Side { minus, plus };

inline constexpr Side opposite(Side s) noexcept { return s == Side::plus ? Side::minus : Side::plus; }

enum class ErrorCode {
    invalid_argument,
    query_outside_tubular_neighborhood,
    no_convergence,
    not_on_surface,
    degenerate_diffusion_at_jump,
    non_parallelity_violated,
    empty_surface_sampling,
    nonpositive_bound,
    singular_jacobian,
    inverse_iteration_diverged,
    non_finite_state,
    failure_budget_exceeded,
    insufficient_levels,
    mismatched_path_counts,
    degenerate_design,
    invalid_intensity_matrix,
    invalid_simplex_start,
    configuration,
};

inline constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::query_outside_tubular_neighborhood: return "QueryOutsideTubularNeighborhood";
    case ErrorCode::no_convergence: return "NoConvergence";
    case ErrorCode::not_on_surface: return "NotOnSurface";
    case ErrorCode::degenerate_diffusion_at_jump: return "DegenerateDiffusionAtJump";
    case ErrorCode::non_parallelity_violated: return "NonParallelityViolated";
    case ErrorCode::empty_surface_sampling: return "EmptySurfaceSampling";
    case ErrorCode::nonpositive_bound: return "NonpositiveBound";
    case ErrorCode::singular_jacobian: return "SingularJacobian";
    case ErrorCode::inverse_iteration_diverged: return "InverseIterationDiverged";
    case ErrorCode::non_finite_state: return "NonFiniteState";
    case ErrorCode::failure_budget_exceeded: return "FailureBudgetExceeded";
    case ErrorCode::insufficient_levels: return "InsufficientLevels";
    case ErrorCode::mismatched_path_counts: return "MismatchedPathCounts";
    case ErrorCode::degenerate_design: return "DegenerateDesign";
    case ErrorCode::invalid_intensity_matrix: return "InvalidIntensityMatrix";
    case ErrorCode::invalid_simplex_start: return "InvalidSimplexStart";
    case ErrorCode::configuration: return "ConfigurationError";
    }
    return "Unknown";
}

/// Exception carrying a machine-readable error code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline Vector make_vector(std::initializer_list<double> values) {
    Vector v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v(i++) = x;
    return v;
}

} // namespace gmsde
