#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "gbt/errors.hpp"
#include "gbt/gp_tracker.hpp"
#include "gbt/rng.hpp"

namespace gbt {

enum class TargetKind { case1, case2, case3, gp_sample, custom };

/// Target motion models of the benchmark scenarios. Construction precomputes
/// whatever tables the kind needs; queries are const and thread safe.
class TargetModel {
public:
    /// Constant-velocity target from [-1,-1] at [0.5, 0.5] m/s.
    static TargetModel case1() {
        TargetModel m(TargetKind::case1);
        return m;
    }

    /// 8-shaped orbit of size 3 m around the origin, starting at [3, 0].
    static TargetModel case2() {
        TargetModel m(TargetKind::case2);
        return m;
    }

    /// Nonholonomic unicycle from [-2,-2]: unit speed, heading rate
    /// 0.5 sin^2(3t). Integrated once with RK4 at `fine_dt` up to `t_end`.
    static TargetModel case3(double psi0 = 0.0, double fine_dt = 1e-3, double t_end = 25.0) {
        TargetModel m(TargetKind::case3);
        m.fine_dt_ = fine_dt;
        const int steps = static_cast<int>(std::ceil(t_end / fine_dt));
        m.table_.reserve(static_cast<std::size_t>(steps) + 1);
        Eigen::Vector3d s(-2.0, -2.0, psi0);
        m.table_.push_back(s.head<2>());
        auto deriv = [](double t, const Eigen::Vector3d& x) {
            return Eigen::Vector3d(std::cos(x[2]), std::sin(x[2]),
                                   0.5 * std::sin(3.0 * t) * std::sin(3.0 * t));
        };
        for (int i = 0; i < steps; ++i) {
            const double t = i * fine_dt;
            const Eigen::Vector3d k1 = deriv(t, s);
            const Eigen::Vector3d k2 = deriv(t + 0.5 * fine_dt, s + 0.5 * fine_dt * k1);
            const Eigen::Vector3d k3 = deriv(t + 0.5 * fine_dt, s + 0.5 * fine_dt * k2);
            const Eigen::Vector3d k4 = deriv(t + fine_dt, s + fine_dt * k3);
            s += (fine_dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            m.table_.push_back(s.head<2>());
        }
        return m;
    }

    /// One draw from the prior GP (per-coordinate SE kernel, unit signal
    /// variance) on the uniform grid, held between nodes by Catmull-Rom
    /// interpolation.
    static TargetModel gp_sample(double length_scale, double grid_step, double t_end, Rng& rng) {
        TargetModel m(TargetKind::gp_sample);
        m.fine_dt_ = grid_step;
        std::vector<double> times;
        const int n = static_cast<int>(std::ceil(t_end / grid_step)) + 1;
        times.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) times.push_back(i * grid_step);
        KernelParams kp;
        kp.length_scale = length_scale;
        kp.signal_var = 1.0;
        kp.noise_var = 0.0;
        const Eigen::MatrixX2d path = sample_from_prior(times, kp, rng);
        m.table_.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) m.table_.emplace_back(path(i, 0), path(i, 1));
        return m;
    }

    /// Piecewise-linear waypoint track (t must be increasing).
    static TargetModel custom(std::vector<std::pair<double, Eigen::Vector2d>> waypoints) {
        if (waypoints.size() < 2) throw ConfigError("custom target needs at least two waypoints");
        for (std::size_t i = 1; i < waypoints.size(); ++i) {
            if (!(waypoints[i].first > waypoints[i - 1].first)) {
                throw ConfigError("custom target waypoints must have increasing times");
            }
        }
        TargetModel m(TargetKind::custom);
        m.waypoints_ = std::move(waypoints);
        return m;
    }

    TargetKind kind() const { return kind_; }

    Eigen::Vector2d position(double t) const {
        switch (kind_) {
        case TargetKind::case1:
            return {-1.0 + 0.5 * t, -1.0 + 0.5 * t};
        case TargetKind::case2: {
            const double th = 0.125 * M_PI * t;
            const double s = std::sin(th);
            const double denom = (1.0 + s * s) * (1.0 + s * s);
            return {3.0 * std::cos(th) / denom, 3.0 * std::cos(th) * s / denom};
        }
        case TargetKind::case3:
            return linear_lookup(t);
        case TargetKind::gp_sample:
            return catmull_rom_lookup(t);
        case TargetKind::custom:
            return waypoint_lookup(t);
        }
        throw Error("unreachable target kind");
    }

private:
    explicit TargetModel(TargetKind k) : kind_(k) {}

    Eigen::Vector2d linear_lookup(double t) const {
        const double pos = std::max(0.0, t / fine_dt_);
        const auto last = static_cast<double>(table_.size() - 1);
        const double clamped = std::min(pos, last);
        const auto i0 = static_cast<std::size_t>(clamped);
        if (i0 + 1 >= table_.size()) return table_.back();
        const double f = clamped - static_cast<double>(i0);
        return (1.0 - f) * table_[i0] + f * table_[i0 + 1];
    }

    Eigen::Vector2d catmull_rom_lookup(double t) const {
        const double pos = std::min(std::max(0.0, t / fine_dt_),
                                    static_cast<double>(table_.size() - 1));
        const auto i1 = std::min(static_cast<std::size_t>(pos), table_.size() - 2);
        const double f = pos - static_cast<double>(i1);
        const auto at = [&](std::ptrdiff_t i) {
            const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(table_.size());
            return table_[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, n - 1))];
        };
        const Eigen::Vector2d p0 = at(static_cast<std::ptrdiff_t>(i1) - 1);
        const Eigen::Vector2d p1 = at(static_cast<std::ptrdiff_t>(i1));
        const Eigen::Vector2d p2 = at(static_cast<std::ptrdiff_t>(i1) + 1);
        const Eigen::Vector2d p3 = at(static_cast<std::ptrdiff_t>(i1) + 2);
        const double f2 = f * f, f3 = f2 * f;
        return 0.5 * ((2.0 * p1) + (-p0 + p2) * f + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * f2 +
                      (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * f3);
    }

    Eigen::Vector2d waypoint_lookup(double t) const {
        if (t <= waypoints_.front().first) return waypoints_.front().second;
        if (t >= waypoints_.back().first) return waypoints_.back().second;
        for (std::size_t i = 1; i < waypoints_.size(); ++i) {
            if (t <= waypoints_[i].first) {
                const double f = (t - waypoints_[i - 1].first) /
                                 (waypoints_[i].first - waypoints_[i - 1].first);
                return (1.0 - f) * waypoints_[i - 1].second + f * waypoints_[i].second;
            }
        }
        return waypoints_.back().second;
    }

    TargetKind kind_;
    double fine_dt_ = 1e-3;
    std::vector<Eigen::Vector2d> table_;
    std::vector<std::pair<double, Eigen::Vector2d>> waypoints_;
};

inline Eigen::Vector2d target_position(const TargetModel& model, double t) {
    return model.position(t);
}

} // namespace gbt
