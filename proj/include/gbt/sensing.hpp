#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <deque>
#include <string>
#include <vector>

#include "gbt/errors.hpp"
#include "gbt/linalg.hpp"
#include "gbt/rng.hpp"

namespace gbt {

/// One bearing observation: time, unit bearing from observer to target, and
/// the observer position the pseudo measurement is formed from.
struct BearingSample {
    double t = 0.0;
    Eigen::Vector2d lambda = Eigen::Vector2d::UnitX();
    Eigen::Vector2d p_auv = Eigen::Vector2d::Zero();
};

/// Bounded window of bearing samples with uniform spacing. Single writer;
/// const snapshots may be shared freely.
class SlidingDataset {
public:
    SlidingDataset(std::size_t capacity, double spacing)
        : capacity_(capacity), spacing_(spacing) {
        if (capacity_ == 0) throw ConfigError("window capacity must be positive");
        if (!(spacing_ > 0.0)) throw ConfigError("sample spacing must be positive");
    }

    void push(const BearingSample& s) {
        if (std::abs(s.lambda.norm() - 1.0) > 1e-12) {
            throw InvalidSampleError("bearing is not unit length");
        }
        if (!samples_.empty()) {
            const double expected = samples_.back().t + spacing_;
            if (std::abs(s.t - expected) > 1e-9 * std::max(1.0, std::abs(expected))) {
                throw InvalidSampleError("sample time " + std::to_string(s.t) +
                                         " breaks uniform spacing (expected " +
                                         std::to_string(expected) + ")");
            }
        }
        samples_.push_back(s);
        if (samples_.size() > capacity_) samples_.pop_front();
    }

    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }
    std::size_t capacity() const { return capacity_; }
    double spacing() const { return spacing_; }
    const BearingSample& operator[](std::size_t i) const { return samples_[i]; }
    const BearingSample& front() const { return samples_.front(); }
    const BearingSample& back() const { return samples_.back(); }

    std::vector<double> times() const {
        std::vector<double> out(samples_.size());
        for (std::size_t i = 0; i < samples_.size(); ++i) out[i] = samples_[i].t;
        return out;
    }
    std::vector<Eigen::Vector2d> bearings() const {
        std::vector<Eigen::Vector2d> out(samples_.size());
        for (std::size_t i = 0; i < samples_.size(); ++i) out[i] = samples_[i].lambda;
        return out;
    }

private:
    std::size_t capacity_;
    double spacing_;
    std::deque<BearingSample> samples_;
};

/// Noisy bearing of Eq.-(4) form: position noise enters before normalization.
/// Draws exactly two Gaussian variates from `rng`.
inline Eigen::Vector2d measure_bearing(const Eigen::Vector2d& p_target,
                                       const Eigen::Vector2d& p_auv, double sigma_eps,
                                       Rng& rng) {
    const auto [e0, e1] = rng.gaussian_pair();
    const Eigen::Vector2d perturbed =
        p_target - p_auv + sigma_eps * Eigen::Vector2d(e0, e1);
    const double norm = perturbed.norm();
    if (norm < 1e-9) {
        throw CoincidentPositionError("observer coincides with (perturbed) target");
    }
    return perturbed / norm;
}

/// Orthogonal complement lambda_bar = [[0, sqrt(2)], [-sqrt(2), 0]] * lambda.
/// Satisfies lambda_bar . lambda = 0 and |lambda_bar|^2 = 2.
inline Eigen::Vector2d orth_complement(const Eigen::Vector2d& lambda) {
    const double root2 = std::sqrt(2.0);
    return {root2 * lambda[1], -root2 * lambda[0]};
}

/// Stacked pseudo-linear system over a window: y = G P_T + G eps, where G is
/// block diagonal with rows lambda_bar^T and y_i = lambda_bar_i . p_auv_i.
struct PseudoLinearBatch {
    Eigen::MatrixXd G;             // N x 2N
    Eigen::VectorXd y;             // N
    Eigen::VectorXd times;         // N
    Eigen::MatrixXd lambda_bars;   // N x 2 (row i = lambda_bar_i^T)

    Eigen::Index size() const { return y.size(); }
};

inline PseudoLinearBatch assemble_pseudo_linear(const SlidingDataset& d) {
    if (d.empty()) throw EmptyBatchError("pseudo-linear batch from empty window");
    const Eigen::Index n = static_cast<Eigen::Index>(d.size());
    PseudoLinearBatch b;
    b.G = Eigen::MatrixXd::Zero(n, 2 * n);
    b.y = Eigen::VectorXd(n);
    b.times = Eigen::VectorXd(n);
    b.lambda_bars = Eigen::MatrixXd(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = d[static_cast<std::size_t>(i)];
        const Eigen::Vector2d lb = orth_complement(s.lambda);
        b.G(i, 2 * i) = lb[0];
        b.G(i, 2 * i + 1) = lb[1];
        b.y[i] = lb.dot(s.p_auv);
        b.times[i] = s.t;
        b.lambda_bars.row(i) = lb.transpose();
    }
    return b;
}

/// Cumulative bearing matrix P = sum_i (2I - 2 lambda_i lambda_i^T).
/// Symmetric PSD with trace 2N; its condition number measures bearing
/// diversity.
inline Eigen::Matrix2d cumulative_bearing_matrix(const std::vector<Eigen::Vector2d>& bearings) {
    Eigen::Matrix2d p = Eigen::Matrix2d::Zero();
    for (const auto& lam : bearings) {
        p += 2.0 * Eigen::Matrix2d::Identity() - 2.0 * lam * lam.transpose();
    }
    return p;
}

inline Eigen::Matrix2d cumulative_bearing_matrix(const SlidingDataset& d) {
    return cumulative_bearing_matrix(d.bearings());
}

/// Condition number sigma_max/sigma_min of a symmetric PSD 2x2 matrix;
/// +infinity when the smallest eigenvalue vanishes (relative to the largest).
inline double cond_ratio(const Eigen::Matrix2d& p) {
    const auto ev = sym2_eigenvalues(p);
    if (ev.hi <= 0.0 || ev.lo < 1e-12 * ev.hi) return kInfinity;
    return ev.hi / ev.lo;
}

/// CCBM: log10 condition number of the cumulative bearing matrix.
inline double ccbm(const Eigen::Matrix2d& p) {
    const double c = cond_ratio(p);
    return std::isfinite(c) ? std::log10(c) : kInfinity;
}

} // namespace gbt
