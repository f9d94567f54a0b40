#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "gbt/errors.hpp"
#include "gbt/rng.hpp"
#include "gbt/sensing.hpp"
#include "gbt/vehicle.hpp"

namespace gbt {

/// Constant-velocity pseudo-linear Kalman filter state: [p_T; v_T].
struct PlkfState {
    Eigen::Vector4d mean = Eigen::Vector4d::Zero();
    Eigen::Matrix4d cov = Eigen::Matrix4d::Identity();
};

/// One predict/update cycle: CV prediction with white-acceleration process
/// noise, then a scalar pseudo-linear update with measurement row
/// H = [lambda_bar^T, 0, 0] and variance R = 2 sigma_eps^2 (Joseph form).
inline PlkfState plkf_step(const PlkfState& s, const BearingSample& sample, double T,
                           double q_accel, double sigma_eps) {
    Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
    f(0, 2) = T;
    f(1, 3) = T;
    const double t2 = T * T, t3 = t2 * T;
    Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
    q(0, 0) = q(1, 1) = q_accel * t3 / 3.0;
    q(0, 2) = q(2, 0) = q(1, 3) = q(3, 1) = q_accel * t2 / 2.0;
    q(2, 2) = q(3, 3) = q_accel * T;

    PlkfState out;
    out.mean = f * s.mean;
    out.cov = f * s.cov * f.transpose() + q;

    const Eigen::Vector2d bar = orth_complement(sample.lambda);
    Eigen::RowVector4d h;
    h << bar[0], bar[1], 0.0, 0.0;
    const double z = bar.dot(sample.p_auv);
    const double r = 2.0 * sigma_eps * sigma_eps;

    const double innovation_var = (h * out.cov * h.transpose())(0, 0) + r;
    if (!(innovation_var > 0.0)) {
        throw FilterDegenerateError("PLKF innovation covariance is not positive");
    }
    const Eigen::Vector4d gain = out.cov * h.transpose() / innovation_var;
    out.mean += gain * (z - h * out.mean);
    const Eigen::Matrix4d ikh = Eigen::Matrix4d::Identity() - gain * h;
    out.cov = ikh * out.cov * ikh.transpose() + gain * r * gain.transpose();
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    return out;
}

/// Least-squares pseudo-triangulation of a position from two bearing rays.
/// Returns nothing when the rays are too close to parallel.
inline std::optional<Eigen::Vector2d> triangulate_two_bearings(const BearingSample& a,
                                                               const BearingSample& b,
                                                               double min_det = 0.05) {
    const Eigen::Vector2d ra = orth_complement(a.lambda);
    const Eigen::Vector2d rb = orth_complement(b.lambda);
    Eigen::Matrix2d m;
    m.row(0) = ra.transpose();
    m.row(1) = rb.transpose();
    if (std::abs(m.determinant()) < min_det) return std::nullopt;
    return m.inverse() * Eigen::Vector2d(ra.dot(a.p_auv), rb.dot(b.p_auv));
}

/// Polynomial-regression target model fitted through the pseudo-linear rows.
/// Times are centered at the window midpoint for conditioning.
struct PolyFit {
    int order = 4;
    Eigen::MatrixXd coeffs; // 2 x (order+1), rows are x/y polynomials
    double t_center = 0.0;

    Eigen::Vector2d predict(double t) const {
        const double s = t - t_center;
        Eigen::Vector2d out = Eigen::Vector2d::Zero();
        double power = 1.0;
        for (int d = 0; d <= order; ++d) {
            out += coeffs.col(d) * power;
            power *= s;
        }
        return out;
    }
};

inline PolyFit poly_fit(const SlidingDataset& d, int order) {
    const int n = static_cast<int>(d.size());
    const int cols = 2 * (order + 1);
    if (n < cols) {
        throw DegenerateGeometryError("poly_fit: needs at least 2(order+1) samples");
    }
    const double t_center = 0.5 * (d.front().t + d.back().t);

    Eigen::MatrixXd a(n, cols);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        const auto& s = d[static_cast<std::size_t>(i)];
        const Eigen::Vector2d bar = orth_complement(s.lambda);
        const double ts = s.t - t_center;
        double power = 1.0;
        for (int deg = 0; deg <= order; ++deg) {
            a(i, deg) = bar[0] * power;
            a(i, order + 1 + deg) = bar[1] * power;
            power *= ts;
        }
        y[i] = bar.dot(s.p_auv);
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    if (qr.rank() < cols) {
        throw DegenerateGeometryError("poly_fit: rank-deficient system (bearings not diverse)");
    }
    // Reject ill-conditioned fits as degenerate too; with noisy high-order
    // extrapolation they produce wild coefficients rather than estimates.
    const Eigen::VectorXd diag = qr.matrixR().diagonal().cwiseAbs();
    if (diag.minCoeff() < 1e-7 * diag.maxCoeff()) {
        throw DegenerateGeometryError("poly_fit: system too ill-conditioned");
    }
    const Eigen::VectorXd c = qr.solve(y);

    PolyFit fit;
    fit.order = order;
    fit.t_center = t_center;
    fit.coeffs = Eigen::MatrixXd(2, order + 1);
    fit.coeffs.row(0) = c.head(order + 1).transpose();
    fit.coeffs.row(1) = c.tail(order + 1).transpose();
    return fit;
}

/// Non-planning AUV behaviors used in the motion-mode and ability studies.
enum class MotionMode { gbt, static_hold, random, direct_placement };

inline MotionMode motion_mode_from_string(const std::string& s) {
    if (s == "gbt") return MotionMode::gbt;
    if (s == "static") return MotionMode::static_hold;
    if (s == "random") return MotionMode::random;
    if (s == "direct_placement") return MotionMode::direct_placement;
    throw ConfigError("unknown motion mode '" + s + "'");
}

struct PlacementTarget {
    Eigen::Vector2d mu_next;          // predicted target position at t_{k+1}
    Eigen::Vector2d lambda_star_next; // desired bearing at t_{k+1}
    double standoff = 1.0;
};

struct MotionCommand {
    Wrench wrench = Wrench::Zero();
    std::optional<Eigen::Vector3d> placed_pose; // set only for direct placement
};

/// Policy for the non-GBT modes. `random` holds one uniformly drawn wrench
/// for the whole control interval; `direct_placement` teleports the vehicle
/// onto the standoff circle, heading at the prediction.
inline MotionCommand motion_policy(MotionMode mode, const AuvParams& p, Rng& rng,
                                   const std::optional<PlacementTarget>& placement) {
    MotionCommand cmd;
    switch (mode) {
    case MotionMode::static_hold:
        return cmd;
    case MotionMode::random:
        for (int i = 0; i < 3; ++i) cmd.wrench[i] = rng.uniform(p.tau_min[i], p.tau_max[i]);
        return cmd;
    case MotionMode::direct_placement: {
        if (!placement) throw Error("direct placement needs a target");
        const Eigen::Vector2d pos =
            placement->mu_next - placement->standoff * placement->lambda_star_next;
        const double psi =
            std::atan2(placement->lambda_star_next[1], placement->lambda_star_next[0]);
        cmd.placed_pose = Eigen::Vector3d(pos[0], pos[1], psi);
        return cmd;
    }
    case MotionMode::gbt:
        break;
    }
    throw Error("motion_policy only covers the static/random/direct modes");
}

} // namespace gbt
