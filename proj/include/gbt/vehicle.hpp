#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "gbt/errors.hpp"
#include "gbt/linalg.hpp"

namespace gbt {

using Wrench = Eigen::Vector3d; // [F_u (N), F_v (N), F_r (N*m)]
using Vector6d = Eigen::Matrix<double, 6, 1>;

/// 3-DOF Fossen model parameters. Defaults are the identified Falcon model.
struct AuvParams {
    double m = 116.0;    // mass (kg)
    double I_z = 13.1;   // yaw inertia (kg*m^2)
    double X_du = -167.6; // added mass, surge (kg)
    double Y_dv = -477.2; // added mass, sway (kg)
    double N_dr = -15.9;  // added mass, yaw (kg*m^2)
    double X_u = 26.9;   // linear damping
    double Y_v = 35.8;
    double N_r = 3.5;
    double D_u = 241.3;  // quadratic damping
    double D_v = 503.8;
    double D_r = 76.9;
    Wrench tau_max{5000.0, 5000.0, 1500.0};
    Wrench tau_min{-5000.0, -5000.0, -1500.0};

    double Mx() const { return m - X_du; }
    double My() const { return m - Y_dv; }
    double Mpsi() const { return I_z - N_dr; }

    void validate() const {
        if (!(Mx() > 0.0 && My() > 0.0 && Mpsi() > 0.0)) {
            throw ConfigError("vehicle: derived inertias must be strictly positive");
        }
        for (int i = 0; i < 3; ++i) {
            if (!(tau_min[i] < 0.0 && 0.0 < tau_max[i])) {
                throw ConfigError("vehicle: tau limits must satisfy tau_min < 0 < tau_max, channel " +
                                  std::to_string(i));
            }
        }
    }
};

/// Pose eta = [x_A, y_A, psi] (earth frame, psi unwrapped) and body velocities
/// nu = [u, v, r].
struct AuvState {
    Eigen::Vector3d eta = Eigen::Vector3d::Zero();
    Eigen::Vector3d nu = Eigen::Vector3d::Zero();

    Eigen::Vector2d position() const { return eta.head<2>(); }
    double psi() const { return eta[2]; }

    Vector6d packed() const {
        Vector6d x;
        x << eta, nu;
        return x;
    }
    static AuvState from_packed(const Vector6d& x) {
        return {x.head<3>(), x.tail<3>()};
    }
};

/// Rotation about z by psi; maps body velocities to earth-frame rates.
inline Eigen::Matrix3d rotation_matrix(double psi) {
    const double c = std::cos(psi);
    const double s = std::sin(psi);
    Eigen::Matrix3d j;
    j << c, -s, 0.0,
         s,  c, 0.0,
         0.0, 0.0, 1.0;
    return j;
}

/// dJ/dt for yaw rate psi_dot.
inline Eigen::Matrix3d rotation_matrix_dot(double psi, double psi_dot) {
    const double c = std::cos(psi);
    const double s = std::sin(psi);
    Eigen::Matrix3d dj;
    dj << -s, -c, 0.0,
           c, -s, 0.0,
         0.0, 0.0, 0.0;
    return psi_dot * dj;
}

inline Eigen::Matrix3d inertia_matrix(const AuvParams& p) {
    return Eigen::Vector3d(p.Mx(), p.My(), p.Mpsi()).asDiagonal();
}

/// Coriolis/centripetal matrix with added mass; skew-symmetric in the sense
/// nu^T C(nu) nu = 0.
inline Eigen::Matrix3d coriolis_matrix(const Eigen::Vector3d& nu, const AuvParams& p) {
    const double u = nu[0];
    const double v = nu[1];
    Eigen::Matrix3d c = Eigen::Matrix3d::Zero();
    c(0, 2) = -p.My() * v;
    c(1, 2) = p.Mx() * u;
    c(2, 0) = p.My() * v;
    c(2, 1) = -p.Mx() * u;
    return c;
}

/// Linear + quadratic damping, diagonal and nonnegative.
inline Eigen::Matrix3d damping_matrix(const Eigen::Vector3d& nu, const AuvParams& p) {
    return Eigen::Vector3d(p.X_u + p.D_u * std::abs(nu[0]),
                           p.Y_v + p.D_v * std::abs(nu[1]),
                           p.N_r + p.D_r * std::abs(nu[2]))
        .asDiagonal();
}

/// Time derivative of the packed state [eta; nu] under wrench tau:
/// eta_dot = J(eta) nu,  M nu_dot + C(nu) nu + D(nu) nu = tau.
inline Vector6d dynamics_derivative(const AuvState& x, const Wrench& tau, const AuvParams& p) {
    const Eigen::Matrix3d j = rotation_matrix(x.psi());
    const Eigen::Vector3d rigid = coriolis_matrix(x.nu, p) * x.nu + damping_matrix(x.nu, p) * x.nu;
    Vector6d dx;
    dx.head<3>() = j * x.nu;
    dx.tail<3>() = (tau - rigid).cwiseQuotient(Eigen::Vector3d(p.Mx(), p.My(), p.Mpsi()));
    return dx;
}

/// Classical RK4 with fixed step dt (final partial step shortened).
/// `tau_fn(t)` supplies the open-loop wrench. Throws IntegrationDivergedError
/// if the state leaves the finite range.
template <typename TauFn>
AuvState integrate(const AuvState& x0, TauFn&& tau_fn, double t0, double t1, double dt,
                   const AuvParams& p) {
    if (!(t1 > t0) || !(dt > 0.0)) {
        throw Error("integrate: requires t1 > t0 and dt > 0");
    }
    Vector6d x = x0.packed();
    double t = t0;
    while (t < t1 - 1e-15) {
        const double h = std::min(dt, t1 - t);
        const auto f = [&](double ts, const Vector6d& xs) {
            return dynamics_derivative(AuvState::from_packed(xs), tau_fn(ts), p);
        };
        const Vector6d k1 = f(t, x);
        const Vector6d k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
        const Vector6d k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
        const Vector6d k4 = f(t + h, x + h * k3);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
        if (!all_finite(x)) {
            throw IntegrationDivergedError("integrate: non-finite state at t=" + std::to_string(t));
        }
    }
    return AuvState::from_packed(x);
}

/// Flat outputs z = [x_A, y_A, psi] and their first derivative determine the
/// full state: eta = z, nu = J(psi)^T z_dot.
inline AuvState flat_to_state(const Eigen::Vector3d& z, const Eigen::Vector3d& zdot) {
    AuvState s;
    s.eta = z;
    s.nu = rotation_matrix(z[2]).transpose() * zdot;
    return s;
}

/// Exact inverse dynamics along a flat trajectory: with nu = J^T z_dot and
/// nu_dot = J^T z_ddot + J_dot^T z_dot,
///   tau = M nu_dot + C(nu) nu + D(nu) nu.
inline Wrench flat_to_wrench(const Eigen::Vector3d& z, const Eigen::Vector3d& zdot,
                             const Eigen::Vector3d& zddot, const AuvParams& p) {
    const Eigen::Matrix3d jt = rotation_matrix(z[2]).transpose();
    const Eigen::Matrix3d jdott = rotation_matrix_dot(z[2], zdot[2]).transpose();
    const Eigen::Vector3d nu = jt * zdot;
    const Eigen::Vector3d nu_dot = jt * zddot + jdott * zdot;
    return inertia_matrix(p) * nu_dot + coriolis_matrix(nu, p) * nu + damping_matrix(nu, p) * nu;
}

} // namespace gbt
