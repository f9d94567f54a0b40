#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "gbt/errors.hpp"
#include "gbt/linalg.hpp"
#include "gbt/optim.hpp"
#include "gbt/vehicle.hpp"

namespace gbt {

struct PlannerConfig {
    int pieces = 5;                 // p, planning horizon in segments
    int horizon = 11;               // n, prediction horizon in steps
    double omega = 2.0 * M_PI;      // desired-bearing angular rate (rad/s)
    double kappa = 1.0;             // unscented-transform spread factor
    int quad_nodes = 20;            // n_c, trapezoid resolution per segment
    double gamma = 0.98;            // limit scale inside the penalty
    double penalty_weight = 1000.0; // w_p
    double smoothing_width = 1.0;   // varpi of the smoothed penalty (N, N*m)
    double segment_duration = 0.1;  // T (s)
    int max_iters = 100;
    double tol = 1e-6;
    double standoff_min = 0.5; // m, clamp on the initialization orbit radius
    double standoff_max = 5.0;
    double range_weight = 0.0; // optional range-keeping term, default off

    void validate() const {
        if (!(pieces >= 2 && pieces <= horizon)) {
            throw ConfigError("planner: requires 2 <= pieces <= horizon");
        }
        if (quad_nodes < 2) throw ConfigError("planner: quad_nodes must be >= 2");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("planner: gamma outside (0,1]");
        if (!(segment_duration > 0.0)) throw ConfigError("planner: segment duration must be positive");
        if (!(smoothing_width > 0.0)) throw ConfigError("planner: smoothing width must be positive");
        if (!(penalty_weight > 0.0)) throw ConfigError("planner: penalty weight must be positive");
        if (!(standoff_min > 0.0 && standoff_max >= standoff_min)) {
            throw ConfigError("planner: bad standoff clamp");
        }
    }
};

/// Piecewise quadratic flat-output trajectory. Piece i covers local time
/// s in [0, T] with z(s) = coeffs[i]^T [1, s, s^2]; columns of each
/// coefficient block are the flat dimensions [x_A, y_A, psi].
class FlatTrajectory {
public:
    FlatTrajectory() = default;
    FlatTrajectory(std::vector<Eigen::Matrix3d> coeffs, double t_start, double segment_duration)
        : coeffs_(std::move(coeffs)), t_start_(t_start), duration_(segment_duration) {}

    int pieces() const { return static_cast<int>(coeffs_.size()); }
    double t_start() const { return t_start_; }
    double segment_duration() const { return duration_; }
    double t_end() const { return t_start_ + duration_ * pieces(); }
    const Eigen::Matrix3d& piece_coeffs(int i) const { return coeffs_[static_cast<std::size_t>(i)]; }

    Eigen::Vector3d value_piece(int i, double s) const {
        return coeffs_[static_cast<std::size_t>(i)].transpose() * Eigen::Vector3d(1.0, s, s * s);
    }
    Eigen::Vector3d derivative_piece(int i, double s) const {
        return coeffs_[static_cast<std::size_t>(i)].transpose() * Eigen::Vector3d(0.0, 1.0, 2.0 * s);
    }
    Eigen::Vector3d second_derivative_piece(int i) const {
        return coeffs_[static_cast<std::size_t>(i)].transpose() * Eigen::Vector3d(0.0, 0.0, 2.0);
    }

    Eigen::Vector3d value(double t) const {
        const auto [i, s] = locate(t);
        return value_piece(i, s);
    }
    Eigen::Vector3d derivative(double t) const {
        const auto [i, s] = locate(t);
        return derivative_piece(i, s);
    }
    Eigen::Vector3d second_derivative(double t) const {
        const auto [i, s] = locate(t);
        return second_derivative_piece(i);
    }

    AuvState state_at(double t) const {
        return flat_to_state(value(t), derivative(t));
    }
    Wrench wrench_at(double t, const AuvParams& p) const {
        const auto [i, s] = locate(t);
        return wrench_at_piece(i, s, p);
    }
    /// Wrench from piece i's polynomial at local time s (junction nodes use the
    /// owning piece, matching the per-piece quadrature convention).
    Wrench wrench_at_piece(int i, double s, const AuvParams& p) const {
        return flat_to_wrench(value_piece(i, s), derivative_piece(i, s), second_derivative_piece(i), p);
    }

private:
    std::pair<int, double> locate(double t) const {
        const double rel = t - t_start_;
        int i = static_cast<int>(std::floor(rel / duration_));
        i = std::max(0, std::min(i, pieces() - 1));
        return {i, rel - i * duration_};
    }

    std::vector<Eigen::Matrix3d> coeffs_;
    double t_start_ = 0.0;
    double duration_ = 0.1;
};

/// Desired bearing schedule on the circular orbit, absolute phase.
inline Eigen::Vector2d desired_bearing(double t, double omega) {
    return {std::cos(omega * t), std::sin(omega * t)};
}

/// The m bearings minimizing the condition number of the cumulative bearing
/// matrix: uniformly spread over the circle (cond = 1).
inline std::vector<Eigen::Vector2d> optimal_bearing_set(int m) {
    if (m < 3) throw DegenerateBearingSetError("optimal bearing set needs m >= 3");
    std::vector<Eigen::Vector2d> out;
    out.reserve(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        const double a = 2.0 * M_PI * i / m;
        out.emplace_back(std::cos(a), std::sin(a));
    }
    return out;
}

/// 2L+1 = 5 sigma points matching mean mu and covariance sigma_tilde.
struct SigmaSet {
    std::array<Eigen::Vector2d, 5> points;
    std::array<double, 5> weights;
};

inline SigmaSet sigma_points(const Eigen::Vector2d& mu, const Eigen::Matrix2d& sigma_tilde,
                             double kappa) {
    constexpr double L = 2.0;
    if (!(kappa > -L)) throw Error("sigma_points: kappa must exceed -L");
    const Eigen::Matrix2d root = sym2_sqrt_psd((L + kappa) * sigma_tilde);
    SigmaSet s;
    s.points[0] = mu;
    s.points[1] = mu - root.col(0);
    s.points[2] = mu - root.col(1);
    s.points[3] = mu + root.col(0);
    s.points[4] = mu + root.col(1);
    s.weights[0] = kappa / (L + kappa);
    for (int j = 1; j < 5; ++j) s.weights[j] = 1.0 / (2.0 * (L + kappa));
    return s;
}

/// UT approximation of the expected similarity between the desired bearings
/// and the bearings the AUV would sample from `endpoints`. Each horizon term
/// lies in [-1, 1].
inline double similarity_cost(const std::vector<Eigen::Vector2d>& endpoints,
                              const std::vector<Eigen::Vector2d>& schedule,
                              const std::vector<SigmaSet>& sets) {
    if (endpoints.size() != schedule.size() || endpoints.size() != sets.size()) {
        throw Error("similarity_cost: mismatched horizon lengths");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < endpoints.size(); ++i) {
        for (int j = 0; j < 5; ++j) {
            const Eigen::Vector2d diff = sets[i].points[static_cast<std::size_t>(j)] - endpoints[i];
            const double dist = diff.norm();
            if (dist < 1e-6) {
                throw NearSingularBearingError("trajectory endpoint coincides with a sigma point");
            }
            total += sets[i].weights[static_cast<std::size_t>(j)] * schedule[i].dot(diff) / dist;
        }
    }
    return total;
}

inline double similarity_cost(const std::vector<Eigen::Vector2d>& endpoints,
                              const std::vector<Eigen::Vector2d>& schedule,
                              const std::vector<std::pair<Eigen::Vector2d, Eigen::Matrix2d>>& posteriors,
                              double kappa) {
    std::vector<SigmaSet> sets;
    sets.reserve(posteriors.size());
    for (const auto& [mu, cov] : posteriors) sets.push_back(sigma_points(mu, cov, kappa));
    return similarity_cost(endpoints, schedule, sets);
}

/// Solves the 3p x 3p linear system fixing initial pose/velocity, segment
/// endpoints, and position/velocity continuity. The factorization depends
/// only on (p, T) and is reused across solves.
class SplineSolver {
public:
    SplineSolver(int pieces, double segment_duration)
        : pieces_(pieces), duration_(segment_duration) {
        if (pieces < 1) throw ConfigError("spline: needs at least one piece");
        if (!(segment_duration > 0.0)) throw ConfigError("spline: segment duration must be positive");
        const int n = 3 * pieces;
        const double t = duration_;
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        int row = 0;
        m(row++, 0) = 1.0;                                   // c_{1,0} = eta
        m(row++, 1) = 1.0;                                   // c_{1,1} = J(eta) nu
        for (int i = 0; i < pieces; ++i) {                   // endpoint of each piece
            m(row, 3 * i) = 1.0;
            m(row, 3 * i + 1) = t;
            m(row, 3 * i + 2) = t * t;
            ++row;
        }
        for (int i = 0; i + 1 < pieces; ++i) {               // position continuity
            m(row, 3 * i) = 1.0;
            m(row, 3 * i + 1) = t;
            m(row, 3 * i + 2) = t * t;
            m(row, 3 * (i + 1)) = -1.0;
            ++row;
        }
        for (int i = 0; i + 1 < pieces; ++i) {               // velocity continuity
            m(row, 3 * i + 1) = 1.0;
            m(row, 3 * i + 2) = 2.0 * t;
            m(row, 3 * (i + 1) + 1) = -1.0;
            ++row;
        }
        lu_.compute(m);
        if (!lu_.isInvertible()) {
            throw SplineSolveError("spline constraint system is singular");
        }
    }

    FlatTrajectory solve(const Eigen::Vector3d& eta0, const Eigen::Vector3d& nu0,
                         const std::vector<Eigen::Vector3d>& endpoints, double t_start) const {
        if (static_cast<int>(endpoints.size()) != pieces_) {
            throw SplineSolveError("spline: endpoint count does not match piece count");
        }
        const int n = 3 * pieces_;
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 3);
        const Eigen::Vector3d world_vel = rotation_matrix(eta0[2]) * nu0;
        rhs.row(0) = eta0.transpose();
        rhs.row(1) = world_vel.transpose();
        for (int i = 0; i < pieces_; ++i) {
            rhs.row(2 + i) = endpoints[static_cast<std::size_t>(i)].transpose();
        }
        const Eigen::MatrixXd sol = lu_.solve(rhs); // (3p) x 3, columns are flat dims
        std::vector<Eigen::Matrix3d> coeffs(static_cast<std::size_t>(pieces_));
        for (int i = 0; i < pieces_; ++i) {
            coeffs[static_cast<std::size_t>(i)] = sol.block<3, 3>(3 * i, 0);
        }
        return FlatTrajectory(std::move(coeffs), t_start, duration_);
    }

    int pieces() const { return pieces_; }

private:
    int pieces_;
    double duration_;
    Eigen::FullPivLU<Eigen::MatrixXd> lu_;
};

inline FlatTrajectory solve_coefficients(const Eigen::Vector3d& eta0, const Eigen::Vector3d& nu0,
                                         const std::vector<Eigen::Vector3d>& endpoints,
                                         double segment_duration, double t_start = 0.0) {
    return SplineSolver(static_cast<int>(endpoints.size()), segment_duration)
        .solve(eta0, nu0, endpoints, t_start);
}

/// Smoothed one-sided penalty: zero below -varpi, quadratic blend inside
/// [-varpi, varpi], identity above. C^1, nondecreasing, convex.
inline double penalty_g(double x, double varpi) {
    if (x <= -varpi) return 0.0;
    if (x >= varpi) return x;
    const double b = x + varpi;
    return b * b / (4.0 * varpi);
}

/// Trapezoid approximation of the integrated wrench-limit violation beyond
/// the gamma-scaled limits, per piece and channel. Zero means the scaled
/// limits hold (up to the smoothing dead zone) at every quadrature node.
inline double constraint_violation(const FlatTrajectory& traj, const AuvParams& p,
                                   const PlannerConfig& cfg) {
    const int nc = cfg.quad_nodes;
    const double t = traj.segment_duration();
    const double h = t / nc;
    double total = 0.0;
    for (int i = 0; i < traj.pieces(); ++i) {
        for (int j = 0; j <= nc; ++j) {
            const double w = (j == 0 || j == nc) ? 0.5 : 1.0;
            const Wrench tau = traj.wrench_at_piece(i, j * h, p);
            for (int rho = 0; rho < 3; ++rho) {
                total += w * h *
                         (penalty_g(tau[rho] - cfg.gamma * p.tau_max[rho], cfg.smoothing_width) +
                          penalty_g(cfg.gamma * p.tau_min[rho] - tau[rho], cfg.smoothing_width));
            }
        }
    }
    return total;
}

/// Largest excess of the planned wrench beyond the *unscaled* limits over all
/// quadrature nodes (diagnostic, 0 when the plan is feasible).
inline double max_limit_excess(const FlatTrajectory& traj, const AuvParams& p, int quad_nodes) {
    const double h = traj.segment_duration() / quad_nodes;
    double worst = 0.0;
    for (int i = 0; i < traj.pieces(); ++i) {
        for (int j = 0; j <= quad_nodes; ++j) {
            const Wrench tau = traj.wrench_at_piece(i, j * h, p);
            for (int rho = 0; rho < 3; ++rho) {
                worst = std::max(worst, tau[rho] - p.tau_max[rho]);
                worst = std::max(worst, p.tau_min[rho] - tau[rho]);
            }
        }
    }
    return worst;
}

struct PlanDiagnostics {
    int iterations = 0;
    int evaluations = 0;
    double cost = 0.0;       // J = -F + w_p I (+ optional range term)
    double similarity = 0.0; // F-hat at the returned endpoints
    double penalty = 0.0;    // I-hat at the returned endpoints
    double max_node_violation = 0.0;
    bool degraded = false;
};

struct PlanResult {
    std::vector<Eigen::Vector3d> endpoints;
    FlatTrajectory trajectory;
    PlanDiagnostics diag;
};

namespace detail {

inline double unwrap_near(double angle, double reference) {
    return angle + 2.0 * M_PI * std::round((reference - angle) / (2.0 * M_PI));
}

/// Sustainable yaw rate: the largest r with linear+quadratic yaw drag within
/// the scaled torque limit.
inline double max_yaw_rate(const AuvParams& p, double gamma) {
    const double budget = gamma * p.tau_max[2];
    const double disc = p.N_r * p.N_r + 4.0 * p.D_r * budget;
    return p.D_r > 0.0 ? (-p.N_r + std::sqrt(disc)) / (2.0 * p.D_r) : budget / std::max(p.N_r, 1e-9);
}

} // namespace detail

/// Standoff-circle initial guess: each endpoint sits at the predicted target
/// position backed off along the desired bearing, heading pointed at the
/// prediction, with yaw unwrapped from the current heading. Displacements and
/// yaw swings are capped by the vehicle's acceleration/rate budget so the
/// guess starts inside (or near) the feasible set; once the vehicle operates
/// close to the standoff circle the caps are inactive and the guess is the
/// plain backed-off prediction.
inline std::vector<Eigen::Vector3d> initialize_endpoints(
    const AuvState& state, const Eigen::Vector2d& mu_now,
    const std::vector<std::pair<Eigen::Vector2d, Eigen::Matrix2d>>& posteriors,
    const std::vector<Eigen::Vector2d>& schedule, const PlannerConfig& cfg,
    const AuvParams& params) {
    const double range = (mu_now - state.position()).norm();
    const double standoff = std::min(cfg.standoff_max, std::max(cfg.standoff_min, range));

    // Reachable sets after dt: a ball of radius a t^2 / 2 around the ballistic
    // point, and the analogous wedge for yaw (bounded by the drag-limited
    // sustainable rate). Conservative fractions of the scaled force budget.
    const double lin_acc =
        0.7 * cfg.gamma * std::min(params.tau_max[0] / params.Mx(), params.tau_max[1] / params.My());
    const double yaw_acc = 0.7 * cfg.gamma * params.tau_max[2] / params.Mpsi();
    const double yaw_rate_cap = detail::max_yaw_rate(params, cfg.gamma);
    const Eigen::Vector2d vel_world = (rotation_matrix(state.psi()) * state.nu).head<2>();
    const double yaw_rate0 = state.nu[2];
    const double psi0 = state.psi();

    std::vector<Eigen::Vector3d> endpoints;
    endpoints.reserve(posteriors.size());
    double prev_psi = psi0;
    for (std::size_t i = 0; i < posteriors.size(); ++i) {
        const double dt = static_cast<double>(i + 1) * cfg.segment_duration;
        const Eigen::Vector2d want = posteriors[i].first - standoff * schedule[i];
        const Eigen::Vector2d ballistic = state.position() + vel_world * dt;
        const Eigen::Vector2d offset = want - ballistic;
        const double radius = 0.5 * lin_acc * dt * dt;
        const Eigen::Vector2d pos =
            offset.norm() > radius ? Eigen::Vector2d(ballistic + (radius / offset.norm()) * offset)
                                   : want;

        const Eigen::Vector2d aim = posteriors[i].first - pos;
        const double raw =
            aim.norm() > 1e-9 ? std::atan2(aim[1], aim[0]) : std::atan2(schedule[i][1], schedule[i][0]);
        const double unwrapped = detail::unwrap_near(raw, prev_psi);
        const double swing = std::min(yaw_rate0 * dt + 0.5 * yaw_acc * dt * dt,
                                      yaw_rate_cap * dt);
        const double swing_lo = std::max(yaw_rate0 * dt - 0.5 * yaw_acc * dt * dt,
                                         -yaw_rate_cap * dt);
        const double psi = psi0 + std::clamp(unwrapped - psi0, swing_lo, swing);
        prev_psi = psi;
        endpoints.emplace_back(pos[0], pos[1], psi);
    }
    return endpoints;
}

/// Receding-horizon endpoint optimization (unconstrained quasi-Newton over
/// the 3p endpoint variables). Posteriors carry (mu, Sigma + sigma_eps^2 I)
/// at the horizon times t_k + (i+1) T; the schedule carries the matching
/// desired bearings. Falls back to the initialization trajectory with a
/// degraded flag if the solver cannot produce a finite cost.
inline PlanResult optimize_endpoints(
    const AuvState& state, double t_now,
    const std::vector<std::pair<Eigen::Vector2d, Eigen::Matrix2d>>& posteriors,
    const std::vector<Eigen::Vector2d>& schedule, const Eigen::Vector2d& mu_now,
    const AuvParams& params, const PlannerConfig& cfg) {
    cfg.validate();
    const int p = cfg.pieces;
    if (static_cast<int>(posteriors.size()) != p || static_cast<int>(schedule.size()) != p) {
        throw Error("optimize_endpoints: need exactly `pieces` posteriors and desired bearings");
    }

    std::vector<SigmaSet> sets;
    sets.reserve(posteriors.size());
    for (const auto& [mu, cov] : posteriors) sets.push_back(sigma_points(mu, cov, cfg.kappa));

    const SplineSolver solver(p, cfg.segment_duration);
    const std::vector<Eigen::Vector3d> init =
        initialize_endpoints(state, mu_now, posteriors, schedule, cfg, params);
    const double standoff = (init[0].head<2>() - posteriors[0].first).norm();

    auto unpack = [p](const Eigen::VectorXd& x) {
        std::vector<Eigen::Vector3d> endpoints(static_cast<std::size_t>(p));
        for (int i = 0; i < p; ++i) endpoints[static_cast<std::size_t>(i)] = x.segment<3>(3 * i);
        return endpoints;
    };

    auto objective = [&](const Eigen::VectorXd& x) -> double {
        const auto endpoints = unpack(x);
        std::vector<Eigen::Vector2d> positions(endpoints.size());
        for (std::size_t i = 0; i < endpoints.size(); ++i) positions[i] = endpoints[i].head<2>();
        try {
            const double f_hat = similarity_cost(positions, schedule, sets);
            const FlatTrajectory traj = solver.solve(state.eta, state.nu, endpoints, t_now);
            double j = -f_hat + cfg.penalty_weight * constraint_violation(traj, params, cfg);
            if (cfg.range_weight > 0.0) {
                for (std::size_t i = 0; i < positions.size(); ++i) {
                    const double r = (positions[i] - posteriors[i].first).norm();
                    j += cfg.range_weight * (r - standoff) * (r - standoff);
                }
            }
            return j;
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    Eigen::VectorXd x0(3 * p);
    for (int i = 0; i < p; ++i) x0.segment<3>(3 * i) = init[static_cast<std::size_t>(i)];

    MinimizeOptions opt;
    opt.max_iters = cfg.max_iters;
    opt.grad_tol = cfg.tol;
    opt.fd_step = Eigen::VectorXd(3 * p);
    for (int i = 0; i < p; ++i) {
        opt.fd_step.segment<3>(3 * i) << 1e-6, 1e-6, 1e-5; // positions, heading
    }

    const MinimizeResult res = minimize_bfgs(objective, x0, opt);

    PlanResult out;
    if (!std::isfinite(res.f)) {
        out.endpoints = init;
        out.trajectory = solver.solve(state.eta, state.nu, init, t_now);
        out.diag.degraded = true;
        out.diag.iterations = res.iterations;
        out.diag.evaluations = res.evaluations;
        out.diag.cost = kInfinity;
        out.diag.penalty = constraint_violation(out.trajectory, params, cfg);
        out.diag.max_node_violation = max_limit_excess(out.trajectory, params, cfg.quad_nodes);
        return out;
    }

    out.endpoints = unpack(res.x);
    out.trajectory = solver.solve(state.eta, state.nu, out.endpoints, t_now);
    std::vector<Eigen::Vector2d> positions(out.endpoints.size());
    for (std::size_t i = 0; i < out.endpoints.size(); ++i) positions[i] = out.endpoints[i].head<2>();
    out.diag.iterations = res.iterations;
    out.diag.evaluations = res.evaluations;
    out.diag.cost = res.f;
    out.diag.similarity = similarity_cost(positions, schedule, sets);
    out.diag.penalty = constraint_violation(out.trajectory, params, cfg);
    out.diag.max_node_violation = max_limit_excess(out.trajectory, params, cfg.quad_nodes);
    return out;
}

} // namespace gbt
