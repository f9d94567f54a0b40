#pragma once

// Validation oracles kept deliberately independent of the implementation
// paths they check: kernels, complements and conditioning are re-derived
// inline from first principles instead of calling the library routines.
// Used by the test suites and by the `check` CLI subcommand.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gbt/rng.hpp"
#include "gbt/sensing.hpp"

namespace gbt::selfcheck {

struct OraclePrediction {
    Eigen::Vector2d mean;
    Eigen::Matrix2d cov;
};

/// Pseudo-linear GP conditioning via the explicitly assembled joint Gaussian
/// of measurements and query position, inverted in information form: with
/// joint covariance S and precision P = S^-1 partitioned at the query block,
/// cov = P22^-1 and mean = -P22^-1 P21 y.
inline OraclePrediction joint_conditioning(const std::vector<double>& times,
                                           const std::vector<Eigen::Vector2d>& bearings,
                                           const std::vector<Eigen::Vector2d>& auv_positions,
                                           double length_scale, double signal_var,
                                           double noise_var, double t_star) {
    const int n = static_cast<int>(times.size());
    auto se = [&](double a, double b) {
        const double d = a - b;
        return signal_var * std::exp(-d * d / (2.0 * length_scale * length_scale));
    };

    // Full-size pseudo-linear operator G (N x 2N) and block kernel matrices.
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, 2 * n);
    Eigen::VectorXd y(n);
    const double r2 = std::sqrt(2.0);
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector2d bar(r2 * bearings[static_cast<std::size_t>(i)][1],
                                  -r2 * bearings[static_cast<std::size_t>(i)][0]);
        g(i, 2 * i) = bar[0];
        g(i, 2 * i + 1) = bar[1];
        y[i] = bar.dot(auv_positions[static_cast<std::size_t>(i)]);
    }
    Eigen::MatrixXd k(2 * n, 2 * n);
    Eigen::MatrixXd k_star(2 * n, 2);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            k.block<2, 2>(2 * i, 2 * j) =
                se(times[static_cast<std::size_t>(i)], times[static_cast<std::size_t>(j)]) *
                Eigen::Matrix2d::Identity();
        }
        k_star.block<2, 2>(2 * i, 0) =
            se(times[static_cast<std::size_t>(i)], t_star) * Eigen::Matrix2d::Identity();
    }

    const int m = n + 2;
    Eigen::MatrixXd joint(m, m);
    joint.topLeftCorner(n, n) =
        g * (k + noise_var * Eigen::MatrixXd::Identity(2 * n, 2 * n)) * g.transpose();
    joint.topRightCorner(n, 2) = g * k_star;
    joint.bottomLeftCorner(2, n) = joint.topRightCorner(n, 2).transpose();
    joint.bottomRightCorner(2, 2) = se(t_star, t_star) * Eigen::Matrix2d::Identity();

    const Eigen::MatrixXd precision = joint.fullPivLu().inverse();
    const Eigen::Matrix2d p22 = precision.bottomRightCorner(2, 2);
    const Eigen::MatrixXd p21 = precision.bottomLeftCorner(2, n);
    const Eigen::Matrix2d cov = p22.inverse();
    OraclePrediction out;
    out.cov = 0.5 * (cov + cov.transpose());
    out.mean = -out.cov * (p21 * y);
    return out;
}

inline OraclePrediction joint_conditioning(const SlidingDataset& d, double length_scale,
                                           double signal_var, double noise_var, double t_star) {
    std::vector<Eigen::Vector2d> pos(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) pos[i] = d[i].p_auv;
    return joint_conditioning(d.times(), d.bearings(), pos, length_scale, signal_var, noise_var,
                              t_star);
}

/// Scalar GP regression (textbook form) used to cross-check the axis-aligned
/// degeneration of the pseudo-linear tracker.
struct ScalarGp {
    double mean;
    double var;
};

inline ScalarGp scalar_gp(const std::vector<double>& times, const std::vector<double>& values,
                          double length_scale, double signal_var, double noise_var,
                          double t_star) {
    const int n = static_cast<int>(times.size());
    auto se = [&](double a, double b) {
        const double d = a - b;
        return signal_var * std::exp(-d * d / (2.0 * length_scale * length_scale));
    };
    Eigen::MatrixXd k(n, n);
    Eigen::VectorXd ks(n), y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) k(i, j) = se(times[i], times[j]);
        k(i, i) += noise_var;
        ks[i] = se(times[i], t_star);
        y[i] = values[i];
    }
    const Eigen::VectorXd w = k.ldlt().solve(ks);
    return {w.dot(y), se(t_star, t_star) - w.dot(ks)};
}

/// Monte-Carlo estimate of one horizon term of the expected bearing
/// similarity: E <lambda_star, unit(P~ - p_auv)> with P~ ~ N(mu, sigma).
struct McEstimate {
    double mean;
    double stderr_;
};

inline McEstimate mc_similarity_term(const Eigen::Vector2d& mu, const Eigen::Matrix2d& sigma,
                                     const Eigen::Vector2d& lambda_star,
                                     const Eigen::Vector2d& p_auv, int samples, Rng& rng) {
    Eigen::LLT<Eigen::Matrix2d> llt(sigma + 1e-15 * Eigen::Matrix2d::Identity());
    const Eigen::Matrix2d l = llt.matrixL();
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < samples; ++i) {
        const auto [a, b] = rng.gaussian_pair();
        const Eigen::Vector2d p = mu + l * Eigen::Vector2d(a, b);
        const Eigen::Vector2d diff = p - p_auv;
        const double norm = diff.norm();
        const double val = norm > 0.0 ? lambda_star.dot(diff) / norm : 0.0;
        sum += val;
        sum_sq += val * val;
    }
    const double mean = sum / samples;
    const double var = std::max(0.0, sum_sq / samples - mean * mean);
    return {mean, std::sqrt(var / samples)};
}

/// Random search over bearing m-sets: the smallest condition number of the
/// cumulative bearing matrix found across `trials` uniformly random sets.
inline double random_search_min_cond(int m, int trials, Rng& rng) {
    double best = kInfinity;
    std::vector<Eigen::Vector2d> set(static_cast<std::size_t>(m));
    for (int t = 0; t < trials; ++t) {
        for (int i = 0; i < m; ++i) {
            const double a = rng.uniform(0.0, 2.0 * M_PI);
            set[static_cast<std::size_t>(i)] = {std::cos(a), std::sin(a)};
        }
        best = std::min(best, cond_ratio(cumulative_bearing_matrix(set)));
    }
    return best;
}

/// Central-difference derivative of a scalar function of one variable.
inline double central_difference(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

} // namespace gbt::selfcheck
