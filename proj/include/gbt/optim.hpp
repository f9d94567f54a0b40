#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <utility>

namespace gbt {

struct MinimizeOptions {
    int max_iters = 100;
    double grad_tol = 1e-6;       // infinity norm of the FD gradient
    Eigen::VectorXd fd_step;      // per-coordinate central-difference steps
    Eigen::VectorXd lower;        // optional box, empty = unbounded
    Eigen::VectorXd upper;
    int max_line_search = 40;
};

struct MinimizeResult {
    Eigen::VectorXd x;
    double f = std::numeric_limits<double>::infinity();
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

namespace detail {

inline Eigen::VectorXd clamp_to_box(Eigen::VectorXd x, const MinimizeOptions& opt) {
    if (opt.lower.size() == x.size()) x = x.cwiseMax(opt.lower);
    if (opt.upper.size() == x.size()) x = x.cwiseMin(opt.upper);
    return x;
}

} // namespace detail

/// BFGS with central finite-difference gradients and Armijo backtracking.
/// Non-finite objective values are treated as +infinity (the line search
/// backs away from them). Returns the best iterate seen, so the result never
/// exceeds f(x0). Optional box constraints are enforced by projection.
template <typename F>
MinimizeResult minimize_bfgs(F&& f, Eigen::VectorXd x0, const MinimizeOptions& opt) {
    const Eigen::Index n = x0.size();
    MinimizeResult res;
    int evals = 0;

    auto eval = [&](const Eigen::VectorXd& x) -> double {
        ++evals;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    Eigen::VectorXd step = opt.fd_step;
    if (step.size() != n) step = Eigen::VectorXd::Constant(n, 1e-6);

    auto gradient = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) -> bool {
        g.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd xp = x, xm = x;
            xp[i] += step[i];
            xm[i] -= step[i];
            const double fp = eval(xp);
            const double fm = eval(xm);
            if (!std::isfinite(fp) || !std::isfinite(fm)) return false;
            g[i] = (fp - fm) / (2.0 * step[i]);
        }
        return true;
    };

    Eigen::VectorXd x = detail::clamp_to_box(std::move(x0), opt);
    double fx = eval(x);
    res.x = x;
    res.f = fx;
    if (!std::isfinite(fx)) {
        res.evaluations = evals;
        return res;
    }

    Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
    bool first_update = true;
    Eigen::VectorXd grad;
    if (!gradient(x, grad)) {
        res.evaluations = evals;
        return res;
    }

    int stagnant = 0;
    for (int iter = 0; iter < opt.max_iters; ++iter) {
        res.iterations = iter + 1;
        if (grad.lpNorm<Eigen::Infinity>() <= opt.grad_tol) {
            res.converged = true;
            break;
        }

        Eigen::VectorXd dir = -(h_inv * grad);
        double slope = grad.dot(dir);
        if (!(slope < 0.0)) { // not a descent direction; reset to steepest
            h_inv.setIdentity();
            dir = -grad;
            slope = grad.dot(dir);
        }

        // Armijo backtracking with projection onto the box. If the
        // quasi-Newton direction stalls, retry once along steepest descent.
        Eigen::VectorXd x_new;
        double f_new = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            double alpha = 1.0;
            for (int ls = 0; ls < opt.max_line_search; ++ls) {
                x_new = detail::clamp_to_box(x + alpha * dir, opt);
                f_new = eval(x_new);
                const double gain = slope * alpha;
                if (std::isfinite(f_new) && f_new <= fx + 1e-4 * gain &&
                    (x_new - x).lpNorm<Eigen::Infinity>() > 0.0) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted && attempt == 0) {
                h_inv.setIdentity();
                first_update = true;
                dir = -grad;
                slope = grad.dot(dir);
                if (!(slope < 0.0)) break;
            }
        }
        if (!accepted) {
            break; // no further progress possible
        }

        Eigen::VectorXd grad_new;
        if (!gradient(x_new, grad_new)) {
            x = x_new;
            fx = f_new;
            break;
        }

        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd yv = grad_new - grad;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            if (first_update) {
                // Shanno scaling of the seed Hessian; tames badly scaled
                // objectives before curvature information accumulates.
                h_inv *= sy / yv.squaredNorm();
                first_update = false;
            }
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
            h_inv = (eye - rho * s * yv.transpose()) * h_inv *
                        (eye - rho * yv * s.transpose()) +
                    rho * s * s.transpose();
        }

        stagnant = (fx - f_new) < 1e-12 * (1.0 + std::abs(f_new)) ? stagnant + 1 : 0;
        x = std::move(x_new);
        fx = f_new;
        grad = std::move(grad_new);
        if (fx < res.f) {
            res.f = fx;
            res.x = x;
        }
        if (stagnant >= 3) {
            res.converged = true; // objective has stopped moving
            break;
        }
    }

    if (fx < res.f) {
        res.f = fx;
        res.x = x;
    }
    res.evaluations = evals;
    return res;
}

} // namespace gbt
