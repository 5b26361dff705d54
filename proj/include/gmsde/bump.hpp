#pragma once

#include <cmath>

namespace gmsde::bump {

// phi(u) = (1+u)^3 (1-u)^3 = (1-u^2)^3 on [-1, 1], zero elsewhere.

inline double phi(double u) noexcept {
    if (std::abs(u) >= 1.0) return 0.0;
    const double w = 1.0 - u * u;
    return w * w * w;
}

inline double phi_d1(double u) noexcept {
    if (std::abs(u) >= 1.0) return 0.0;
    const double w = 1.0 - u * u;
    return -6.0 * u * w * w;
}

inline double phi_d2(double u) noexcept {
    if (std::abs(u) >= 1.0) return 0.0;
    const double u2 = u * u;
    const double w = 1.0 - u2;
    return -6.0 * w * w + 24.0 * u2 * w;
}

/// Profile along the signed normal offset y: y |y| phi(y / c), with its first
/// two derivatives. The second derivative jumps at y = 0; the value at y = 0
/// is the one-sided limit from y >= 0.
struct Profile {
    double value;
    double d1;
    double d2;
};

inline Profile profile(double y, double c) noexcept {
    const double u = y / c;
    if (std::abs(u) >= 1.0) return {0.0, 0.0, 0.0};
    const double a = std::abs(y);
    const double sgn = y < 0.0 ? -1.0 : 1.0;
    const double p0 = phi(u);
    const double p1 = phi_d1(u) / c;
    const double p2 = phi_d2(u) / (c * c);
    // f(y) = y|y|, f' = 2|y|, f'' = 2 sgn(y)
    return {
        y * a * p0,
        2.0 * a * p0 + y * a * p1,
        2.0 * sgn * p0 + 4.0 * a * p1 + y * a * p2,
    };
}

/// max over y of |y|^2 phi(y/c); attained at |y| = c/2.
inline double profile_max_magnitude(double c) noexcept { return 27.0 * c * c / 256.0; }

} // namespace gmsde::bump
