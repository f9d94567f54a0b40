#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "gbt/errors.hpp"

namespace gbt {

/// Eigenvalues of a symmetric 2x2 matrix, closed form, lo <= hi.
struct Sym2Eigenvalues {
    double lo;
    double hi;
};

inline Sym2Eigenvalues sym2_eigenvalues(const Eigen::Matrix2d& m) {
    const double a = m(0, 0);
    const double b = 0.5 * (m(0, 1) + m(1, 0));
    const double c = m(1, 1);
    const double mean = 0.5 * (a + c);
    const double half_gap = std::hypot(0.5 * (a - c), b);
    return {mean - half_gap, mean + half_gap};
}

/// Symmetric PSD square root of a symmetric 2x2 matrix.
///
/// Uses the closed form Q*sqrt(L)*Q^T = (A + sqrt(det A) I) / sqrt(tr A + 2 sqrt(det A)),
/// which is the eigen-decomposition result written without trig. Eigenvalues in
/// [-tol, 0) are clamped to zero; below -tol the input is rejected.
inline Eigen::Matrix2d sym2_sqrt_psd(const Eigen::Matrix2d& m,
                                     double tol = 1e-9) {
    Eigen::Matrix2d a = 0.5 * (m + m.transpose());
    const auto ev = sym2_eigenvalues(a);
    const double scale = std::max(1.0, std::abs(ev.hi));
    if (ev.lo < -tol * scale) {
        throw MatrixRootError("matrix square root requested for non-PSD matrix (min eigenvalue " +
                              std::to_string(ev.lo) + ")");
    }
    if (ev.lo < 0.0) {
        a += (-ev.lo) * Eigen::Matrix2d::Identity();
    }
    const double det = std::max(0.0, a.determinant());
    const double tr = a.trace();
    const double root_det = std::sqrt(det);
    const double denom = std::sqrt(tr + 2.0 * root_det);
    if (denom <= 0.0 || !std::isfinite(denom)) {
        return Eigen::Matrix2d::Zero(); // only reachable for a == 0
    }
    return (a + root_det * Eigen::Matrix2d::Identity()) / denom;
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    return m.allFinite();
}

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

} // namespace gbt
