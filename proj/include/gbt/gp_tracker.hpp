#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gbt/errors.hpp"
#include "gbt/optim.hpp"
#include "gbt/sensing.hpp"

namespace gbt {

/// Squared-exponential kernel hyperparameters. The block kernel is
/// k(t,t') * I_2; noise_var is the known sensor value and is never tuned.
struct KernelParams {
    double length_scale = 1.0; // l (s)
    double signal_var = 1.0;   // sigma_f^2
    double noise_var = 1e-6;   // sigma_eps^2 (m^2), fixed from the sensor

    double l_min = 0.05, l_max = 50.0;
    double sf2_min = 1e-4, sf2_max = 1e4;

    void validate() const {
        if (!(length_scale >= l_min && length_scale <= l_max)) {
            throw ConfigError("kernel length scale outside [" + std::to_string(l_min) + ", " +
                              std::to_string(l_max) + "]");
        }
        if (!(signal_var >= sf2_min && signal_var <= sf2_max)) {
            throw ConfigError("kernel signal variance outside bounds");
        }
        if (!(noise_var >= 0.0)) throw ConfigError("noise variance must be nonnegative");
    }
};

inline double kernel_eval(double t, double t2, const KernelParams& kp) {
    const double d = t - t2;
    return kp.signal_var * std::exp(-d * d / (2.0 * kp.length_scale * kp.length_scale));
}

namespace detail {

/// Omega_yy = G (K + sigma^2 I) G^T collapsed with the block structure:
/// entry (i,j) = k(t_i,t_j) * (lambda_bar_i . lambda_bar_j) + 2 sigma^2 delta_ij.
inline Eigen::MatrixXd assemble_omega_yy(const PseudoLinearBatch& b, const KernelParams& kp) {
    const Eigen::Index n = b.size();
    Eigen::MatrixXd omega(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double kij = kernel_eval(b.times[i], b.times[j], kp);
            const double dot = b.lambda_bars.row(i).dot(b.lambda_bars.row(j));
            omega(i, j) = kij * dot;
            omega(j, i) = omega(i, j);
        }
        omega(i, i) += 2.0 * kp.noise_var;
    }
    return omega;
}

/// Cholesky with the jitter ladder: 1e-10 * trace/N on the diagonal,
/// escalated x10 up to three times. Throws IllConditionedPriorError if all
/// attempts fail. Omega_yy >= 2 sigma^2 I analytically, so jitter only guards
/// round-off.
inline Eigen::MatrixXd cholesky_with_jitter(Eigen::MatrixXd omega) {
    const Eigen::Index n = omega.rows();
    const double base = 1e-10 * omega.trace() / static_cast<double>(n);
    double jitter = 0.0;
    for (int attempt = 0; attempt <= 3; ++attempt) {
        Eigen::MatrixXd trial = omega;
        if (jitter > 0.0) trial.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(trial);
        if (llt.info() == Eigen::Success) {
            return llt.matrixL();
        }
        jitter = (attempt == 0) ? base : jitter * 10.0;
    }
    throw IllConditionedPriorError("pseudo-measurement prior covariance is not positive definite");
}

} // namespace detail

/// Factorized pseudo-linear GP posterior over target position vs. time.
/// Immutable after construction; predictions at different times may run
/// concurrently.
struct GpPosterior {
    PseudoLinearBatch batch;
    KernelParams params;
    Eigen::MatrixXd chol;  // lower triangular, chol * chol^T = Omega_yy (+jitter)
    Eigen::VectorXd alpha; // Omega_yy^{-1} y
};

inline GpPosterior build_posterior(const SlidingDataset& d, const KernelParams& kp) {
    if (d.empty()) throw EmptyBatchError("posterior requested from empty window");
    GpPosterior gp;
    gp.batch = assemble_pseudo_linear(d);
    gp.params = kp;
    gp.chol = detail::cholesky_with_jitter(detail::assemble_omega_yy(gp.batch, kp));
    gp.alpha = gp.chol.transpose()
                   .triangularView<Eigen::Upper>()
                   .solve(gp.chol.triangularView<Eigen::Lower>().solve(gp.batch.y));
    return gp;
}

struct Prediction {
    Eigen::Vector2d mean;
    Eigen::Matrix2d cov;
};

/// Posterior mean and covariance of the target position at query time t_star.
inline Prediction predict(const GpPosterior& gp, double t_star) {
    const Eigen::Index n = gp.batch.size();
    // Omega_yP* = G K*: row i = k(t_i, t*) lambda_bar_i^T.
    Eigen::MatrixXd cross(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        cross.row(i) = kernel_eval(gp.batch.times[i], t_star, gp.params) * gp.batch.lambda_bars.row(i);
    }
    Prediction out;
    out.mean = cross.transpose() * gp.alpha;
    const Eigen::MatrixXd w = gp.chol.triangularView<Eigen::Lower>().solve(cross);
    Eigen::Matrix2d cov = kernel_eval(t_star, t_star, gp.params) * Eigen::Matrix2d::Identity() -
                          (w.transpose() * w);
    out.cov = 0.5 * (cov + cov.transpose());
    return out;
}

/// Marginal log-likelihood of the pseudo measurements:
/// -1/2 y^T Omega^{-1} y - 1/2 log det Omega - N/2 log 2 pi.
inline double log_marginal_likelihood(const SlidingDataset& d, const KernelParams& kp) {
    if (d.empty()) throw EmptyBatchError("likelihood of empty window");
    const PseudoLinearBatch b = assemble_pseudo_linear(d);
    const Eigen::MatrixXd l = detail::cholesky_with_jitter(detail::assemble_omega_yy(b, kp));
    const Eigen::VectorXd v = l.triangularView<Eigen::Lower>().solve(b.y);
    const double quad = v.squaredNorm();
    const double logdet = 2.0 * l.diagonal().array().log().sum();
    const double n = static_cast<double>(b.size());
    return -0.5 * quad - 0.5 * logdet - 0.5 * n * std::log(2.0 * M_PI);
}

struct TuneOptions {
    int max_iters = 50;
    double grad_tol = 1e-6;
    std::function<void(const std::string&)> warn; // optional warning sink
};

/// Maximize the marginal likelihood over (log l, log sigma_f^2) inside the box
/// bounds, warm-started from `warm_start`. Guaranteed not to return a worse
/// objective than the warm start. Windows with fewer than 3 samples are left
/// untouched.
inline KernelParams tune_hyperparameters(const SlidingDataset& d, const KernelParams& warm_start,
                                         const TuneOptions& topt = {}) {
    if (d.size() < 3) return warm_start;

    auto objective = [&](const Eigen::VectorXd& x) -> double {
        KernelParams kp = warm_start;
        kp.length_scale = std::exp(x[0]);
        kp.signal_var = std::exp(x[1]);
        try {
            return -log_marginal_likelihood(d, kp);
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    Eigen::VectorXd x0(2);
    x0 << std::log(warm_start.length_scale), std::log(warm_start.signal_var);

    MinimizeOptions opt;
    opt.max_iters = topt.max_iters;
    opt.grad_tol = topt.grad_tol;
    opt.fd_step = Eigen::VectorXd::Constant(2, 1e-6);
    opt.lower = Eigen::VectorXd(2);
    opt.upper = Eigen::VectorXd(2);
    opt.lower << std::log(warm_start.l_min), std::log(warm_start.sf2_min);
    opt.upper << std::log(warm_start.l_max), std::log(warm_start.sf2_max);

    const double f0 = objective(x0);
    if (!std::isfinite(f0)) {
        if (topt.warn) topt.warn("hyperparameter objective non-finite at warm start; keeping it");
        return warm_start;
    }

    const MinimizeResult res = minimize_bfgs(objective, x0, opt);
    if (!std::isfinite(res.f) || res.f > f0 + 1e-9) {
        if (topt.warn) topt.warn("hyperparameter tuning made no progress; keeping warm start");
        return warm_start;
    }
    KernelParams out = warm_start;
    out.length_scale = std::exp(res.x[0]);
    out.signal_var = std::exp(res.x[1]);
    return out;
}

/// Draw one 2-D path from the prior GP evaluated at `times` (per-coordinate
/// SE kernel). Rows are positions at the corresponding times.
inline Eigen::MatrixX2d sample_from_prior(const std::vector<double>& times, const KernelParams& kp,
                                          Rng& rng) {
    const Eigen::Index n = static_cast<Eigen::Index>(times.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            k(i, j) = kernel_eval(times[static_cast<std::size_t>(i)],
                                  times[static_cast<std::size_t>(j)], kp);
            k(j, i) = k(i, j);
        }
    }
    k.diagonal().array() += 1e-10 * kp.signal_var;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) {
        throw IllConditionedPriorError("prior gram matrix is not positive definite");
    }
    Eigen::MatrixXd z(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto [a, b] = rng.gaussian_pair();
        z(i, 0) = a;
        z(i, 1) = b;
    }
    return Eigen::MatrixXd(llt.matrixL()) * z;
}

/// Per-query-time ingredients of the probabilistic tracking error bound.
struct BoundReport {
    double t = 0.0;
    double sigma_bar = 0.0;  // m
    double beta = 0.0;       // sqrt(2 ln(|T_k|/delta))
    double delta = 0.0;
    double ccbm_value = 0.0; // log10 cond of the cumulative bearing matrix
    double xi = 0.0;         // m^2
};

/// Tracking error bound: with probability >= 1-delta the true target stays
/// within beta * sigma_bar of the posterior mean simultaneously at every
/// query time. Max/min kernel scans run over the window's sample times; a
/// singular cumulative bearing matrix drops the xi credit (cond -> infinity).
inline std::vector<BoundReport> error_bound(const GpPosterior& gp,
                                            const std::vector<double>& query_times, double delta,
                                            const SlidingDataset& d) {
    if (!(delta > 0.0 && delta <= 1.0)) throw Error("error_bound: delta outside (0, 1]");
    if (d.empty()) throw EmptyBatchError("error_bound needs a nonempty window");

    const double n = static_cast<double>(d.size());
    const double beta = std::sqrt(2.0 * std::log(static_cast<double>(query_times.size()) / delta));
    const Eigen::Matrix2d p = cumulative_bearing_matrix(d);
    const double cond = cond_ratio(p);
    const double ccbm_val = ccbm(p);

    double k_max = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        k_max = std::max(k_max, kernel_eval(d[i].t, d[i].t, gp.params));
    }

    std::vector<BoundReport> out;
    out.reserve(query_times.size());
    for (const double tq : query_times) {
        double k_cross_min = kInfinity;
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double k = kernel_eval(tq, d[i].t, gp.params);
            k_cross_min = std::min(k_cross_min, k * k);
        }
        const double k_self = kernel_eval(tq, tq, gp.params);
        const double credit = std::isfinite(cond) ? k_cross_min / cond : 0.0;
        const double xi = k_self * k_max - credit;
        const double sigma_bar =
            std::sqrt(std::max(0.0, 2.0 * k_self * gp.params.noise_var / (n * k_max) + xi / k_max));
        out.push_back({tq, sigma_bar, beta, delta, ccbm_val, xi});
    }
    return out;
}

} // namespace gbt
