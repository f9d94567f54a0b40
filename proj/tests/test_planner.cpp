#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "gbt/planner.hpp"
#include "gbt/rng.hpp"
#include "gbt/selfcheck.hpp"
#include "gbt/sensing.hpp"

using Catch::Approx;
using namespace gbt;

namespace {

Eigen::Matrix2d random_spd(Rng& rng, double smin, double smax) {
    const double a = rng.uniform(0.0, 2.0 * M_PI);
    Eigen::Matrix2d rot;
    rot << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    const double s1 = rng.uniform(smin, smax);
    const double s2 = rng.uniform(smin, smax);
    return rot * Eigen::Vector2d(s1 * s1, s2 * s2).asDiagonal() * rot.transpose();
}

Eigen::Vector2d random_unit(Rng& rng) {
    const double a = rng.uniform(0.0, 2.0 * M_PI);
    return {std::cos(a), std::sin(a)};
}

} // namespace

TEST_CASE("desired bearing schedule", "[planner]") {
    REQUIRE((desired_bearing(0.0, 2.0 * M_PI) - Eigen::Vector2d(1, 0)).norm() < 1e-15);
    REQUIRE((desired_bearing(0.25, 2.0 * M_PI) - Eigen::Vector2d(0, 1)).norm() < 1e-12);

    // Consecutive samples at T = 0.1 with omega = 2 pi are exactly 36 degrees apart.
    for (int k = 0; k < 10; ++k) {
        const Eigen::Vector2d a = desired_bearing(0.1 * k, 2.0 * M_PI);
        const Eigen::Vector2d b = desired_bearing(0.1 * (k + 1), 2.0 * M_PI);
        const double cosang = a.dot(b);
        REQUIRE(cosang == Approx(std::cos(0.2 * M_PI)).margin(1e-12));
    }
}

TEST_CASE("optimal bearing sets", "[planner]") {
    REQUIRE_THROWS_AS(optimal_bearing_set(2), DegenerateBearingSetError);

    const auto four = optimal_bearing_set(4);
    REQUIRE((four[0] - Eigen::Vector2d(1, 0)).norm() < 1e-15);
    REQUIRE((four[1] - Eigen::Vector2d(0, 1)).norm() < 1e-12);
    REQUIRE((four[2] - Eigen::Vector2d(-1, 0)).norm() < 1e-12);
    REQUIRE((four[3] - Eigen::Vector2d(0, -1)).norm() < 1e-12);

    const Eigen::Matrix2d p3 = cumulative_bearing_matrix(optimal_bearing_set(3));
    REQUIRE((p3 - 3.0 * Eigen::Matrix2d::Identity()).norm() < 1e-12);

    for (int m = 3; m <= 20; ++m) {
        REQUIRE(cond_ratio(cumulative_bearing_matrix(optimal_bearing_set(m))) ==
                Approx(1.0).margin(1e-9));
    }

    // Random-search oracle: no random triple beats the uniform set.
    Rng rng(13);
    REQUIRE(selfcheck::random_search_min_cond(3, 2000, rng) >= 1.0 - 1e-12);
}

TEST_CASE("sigma points", "[planner]") {
    SECTION("identity covariance, kappa = 1") {
        const SigmaSet s = sigma_points(Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity(), 1.0);
        const double r3 = std::sqrt(3.0);
        REQUIRE(s.points[0].norm() == Approx(0.0).margin(1e-15));
        REQUIRE((s.points[1] - Eigen::Vector2d(-r3, 0)).norm() < 1e-12);
        REQUIRE((s.points[2] - Eigen::Vector2d(0, -r3)).norm() < 1e-12);
        REQUIRE((s.points[3] - Eigen::Vector2d(r3, 0)).norm() < 1e-12);
        REQUIRE((s.points[4] - Eigen::Vector2d(0, r3)).norm() < 1e-12);
        REQUIRE(s.weights[0] == Approx(1.0 / 3.0));
        for (int j = 1; j < 5; ++j) REQUIRE(s.weights[static_cast<std::size_t>(j)] == Approx(1.0 / 6.0));
    }

    SECTION("moment matching for random SPD covariances") {
        Rng rng(17);
        for (int trial = 0; trial < 50; ++trial) {
            const Eigen::Vector2d mu(rng.uniform(-3, 3), rng.uniform(-3, 3));
            const Eigen::Matrix2d cov = random_spd(rng, 0.05, 1.5);
            const double kappa = rng.uniform(-1.0, 3.0);
            const SigmaSet s = sigma_points(mu, cov, kappa);

            double wsum = 0.0;
            Eigen::Vector2d mean = Eigen::Vector2d::Zero();
            for (int j = 0; j < 5; ++j) {
                wsum += s.weights[static_cast<std::size_t>(j)];
                mean += s.weights[static_cast<std::size_t>(j)] * s.points[static_cast<std::size_t>(j)];
            }
            REQUIRE(wsum == Approx(1.0).margin(1e-12));
            REQUIRE((mean - mu).norm() < 1e-10);

            Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
            for (int j = 0; j < 5; ++j) {
                const Eigen::Vector2d d = s.points[static_cast<std::size_t>(j)] - mu;
                scatter += s.weights[static_cast<std::size_t>(j)] * d * d.transpose();
            }
            REQUIRE((scatter - cov).norm() < 1e-8);
        }
    }

    SECTION("zero covariance collapses onto the mean") {
        const Eigen::Vector2d mu(2.0, -1.0);
        const SigmaSet s = sigma_points(mu, Eigen::Matrix2d::Zero(), 1.0);
        for (const auto& pt : s.points) REQUIRE((pt - mu).norm() < 1e-12);
    }

    SECTION("non-PSD covariance is rejected") {
        Eigen::Matrix2d bad;
        bad << 1.0, 0.0, 0.0, -0.5;
        REQUIRE_THROWS_AS(sigma_points(Eigen::Vector2d::Zero(), bad, 1.0), MatrixRootError);
    }
}

TEST_CASE("similarity cost extremes and range", "[planner]") {
    const int p = 5;
    std::vector<Eigen::Vector2d> schedule, endpoints;
    std::vector<std::pair<Eigen::Vector2d, Eigen::Matrix2d>> posteriors;
    Rng rng(23);
    for (int i = 0; i < p; ++i) {
        const Eigen::Vector2d lam = desired_bearing(0.1 * (i + 1), 2.0 * M_PI);
        const Eigen::Vector2d mu(rng.uniform(-2, 2), rng.uniform(-2, 2));
        schedule.push_back(lam);
        posteriors.emplace_back(mu, Eigen::Matrix2d::Zero());
        endpoints.push_back(mu - 1.3 * lam); // aligned: bearing to mu equals lam
    }
    REQUIRE(similarity_cost(endpoints, schedule, posteriors, 1.0) == Approx(p).margin(1e-12));

    std::vector<Eigen::Vector2d> anti(endpoints.size());
    for (int i = 0; i < p; ++i) anti[static_cast<std::size_t>(i)] = posteriors[static_cast<std::size_t>(i)].first + 0.9 * schedule[static_cast<std::size_t>(i)];
    REQUIRE(similarity_cost(anti, schedule, posteriors, 1.0) == Approx(-p).margin(1e-12));

    SECTION("bounded by the horizon length for random inputs") {
        for (int trial = 0; trial < 30; ++trial) {
            std::vector<Eigen::Vector2d> ep;
            std::vector<std::pair<Eigen::Vector2d, Eigen::Matrix2d>> post;
            for (int i = 0; i < p; ++i) {
                post.emplace_back(Eigen::Vector2d(rng.uniform(-2, 2), rng.uniform(-2, 2)),
                                  random_spd(rng, 0.05, 0.6));
                ep.emplace_back(rng.uniform(-8, 8), rng.uniform(-8, 8));
            }
            const double f = similarity_cost(ep, schedule, post, 1.0);
            REQUIRE(f <= p + 1e-12);
            REQUIRE(f >= -p - 1e-12);
        }
    }

    SECTION("coincident endpoint rejected") {
        auto bad = endpoints;
        bad[0] = posteriors[0].first;
        REQUIRE_THROWS_AS(similarity_cost(bad, schedule, posteriors, 1.0),
                          NearSingularBearingError);
    }
}

TEST_CASE("UT matches Monte Carlo on operational geometries", "[planner][oracle]") {
    Rng rng(29);
    Rng mc_rng(31);
    for (int trial = 0; trial < 8; ++trial) {
        const Eigen::Vector2d mu(rng.uniform(-2, 2), rng.uniform(-2, 2));
        const Eigen::Matrix2d cov = random_spd(rng, 0.02, 0.2);
        const Eigen::Vector2d lam = random_unit(rng);
        const Eigen::Vector2d pa = mu - rng.uniform(0.7, 3.0) * random_unit(rng);

        const SigmaSet s = sigma_points(mu, cov, 1.0);
        double ut = 0.0;
        for (int j = 0; j < 5; ++j) {
            const Eigen::Vector2d diff = s.points[static_cast<std::size_t>(j)] - pa;
            ut += s.weights[static_cast<std::size_t>(j)] * lam.dot(diff) / diff.norm();
        }
        const auto mc = selfcheck::mc_similarity_term(mu, cov, lam, pa, 100000, mc_rng);
        REQUIRE(std::abs(ut - mc.mean) <= std::max(0.05, 4.0 * mc.stderr_));
    }
}

TEST_CASE("spline coefficients", "[planner]") {
    SECTION("single piece forced by three constraints") {
        const FlatTrajectory traj = solve_coefficients(
            Eigen::Vector3d::Zero(), Eigen::Vector3d(1.0, 0.0, 0.0),
            {Eigen::Vector3d(2.0, 0.0, 0.0)}, 1.0);
        const Eigen::Matrix3d c = traj.piece_coeffs(0);
        REQUIRE(c(0, 0) == Approx(0.0).margin(1e-12));
        REQUIRE(c(1, 0) == Approx(1.0).margin(1e-12));
        REQUIRE(c(2, 0) == Approx(1.0).margin(1e-12));
    }

    SECTION("reproduces a global quadratic exactly") {
        Rng rng(37);
        for (int trial = 0; trial < 10; ++trial) {
            Eigen::Vector3d a(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
            Eigen::Vector3d b(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
            Eigen::Vector3d c(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
            auto q = [&](double t) -> Eigen::Vector3d { return a + b * t + c * t * t; };
            auto qdot = [&](double t) -> Eigen::Vector3d { return b + 2.0 * c * t; };

            const double T = 0.1;
            const int p = 5;
            std::vector<Eigen::Vector3d> endpoints;
            for (int i = 1; i <= p; ++i) endpoints.push_back(q(i * T));
            const Eigen::Vector3d eta0 = q(0.0);
            const Eigen::Vector3d nu0 = rotation_matrix(eta0[2]).transpose() * qdot(0.0);
            const FlatTrajectory traj = solve_coefficients(eta0, nu0, endpoints, T);

            for (double t = 0.0; t <= p * T + 1e-12; t += 0.01) {
                REQUIRE((traj.value(t) - q(t)).norm() < 1e-10);
            }
        }
    }

    SECTION("continuity and initial conditions for random endpoints") {
        Rng rng(41);
        const double T = 0.1;
        const int p = 5;
        for (int trial = 0; trial < 10; ++trial) {
            Eigen::Vector3d eta0(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-3, 3));
            Eigen::Vector3d nu0(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
            std::vector<Eigen::Vector3d> endpoints;
            for (int i = 0; i < p; ++i) {
                endpoints.emplace_back(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
            }
            const FlatTrajectory traj = solve_coefficients(eta0, nu0, endpoints, T);

            REQUIRE((traj.value_piece(0, 0.0) - eta0).norm() < 1e-9);
            const Eigen::Vector3d v0 = rotation_matrix(eta0[2]) * nu0;
            REQUIRE((traj.derivative_piece(0, 0.0) - v0).norm() < 1e-9);
            for (int i = 0; i < p; ++i) {
                REQUIRE((traj.value_piece(i, T) - endpoints[static_cast<std::size_t>(i)]).norm() < 1e-9);
            }
            for (int i = 0; i + 1 < p; ++i) {
                REQUIRE((traj.value_piece(i, T) - traj.value_piece(i + 1, 0.0)).norm() < 1e-9);
                REQUIRE((traj.derivative_piece(i, T) - traj.derivative_piece(i + 1, 0.0)).norm() <
                        1e-9);
            }
        }
    }
}

TEST_CASE("smoothed penalty", "[planner]") {
    const double w = 0.8;
    REQUIRE(penalty_g(-2.0 * w, w) == 0.0);
    REQUIRE(penalty_g(0.0, w) == Approx(w / 4.0));
    REQUIRE(penalty_g(w, w) == Approx(w));

    // C1 continuity at the seams.
    const double h = 1e-7;
    const double slope_left = (penalty_g(w, w) - penalty_g(w - h, w)) / h;
    const double slope_right = (penalty_g(w + h, w) - penalty_g(w, w)) / h;
    REQUIRE(slope_left == Approx(1.0).margin(1e-6));
    REQUIRE(slope_right == Approx(1.0).margin(1e-6));
    const double slope_lo_left = (penalty_g(-w, w) - penalty_g(-w - h, w)) / h;
    const double slope_lo_right = (penalty_g(-w + h, w) - penalty_g(-w, w)) / h;
    REQUIRE(slope_lo_left == Approx(0.0).margin(1e-6));
    REQUIRE(slope_lo_right == Approx(0.0).margin(1e-6));

    // Nondecreasing.
    double prev = -1.0;
    for (double x = -3.0; x <= 3.0; x += 0.01) {
        const double v = penalty_g(x, w);
        REQUIRE(v >= prev - 1e-15);
        prev = v;
    }
}

TEST_CASE("constraint violation quadrature", "[planner]") {
    const AuvParams falcon{};
    PlannerConfig cfg;

    SECTION("stationary plan is feasible") {
        std::vector<Eigen::Vector3d> endpoints(5, Eigen::Vector3d(1.0, -2.0, 0.4));
        const FlatTrajectory traj = solve_coefficients(
            Eigen::Vector3d(1.0, -2.0, 0.4), Eigen::Vector3d::Zero(), endpoints, cfg.segment_duration);
        REQUIRE(constraint_violation(traj, falcon, cfg) == 0.0);
    }

    SECTION("tiny limits are violated by a fast plan") {
        AuvParams weak = falcon;
        weak.tau_max = Wrench(1.0, 1.0, 1.0);
        weak.tau_min = -weak.tau_max;
        std::vector<Eigen::Vector3d> endpoints;
        for (int i = 1; i <= 5; ++i) endpoints.emplace_back(0.2 * i, 0.0, 0.0);
        const FlatTrajectory traj = solve_coefficients(
            Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), endpoints, cfg.segment_duration);
        REQUIRE(constraint_violation(traj, weak, cfg) > 0.0);
        REQUIRE(max_limit_excess(traj, weak, cfg.quad_nodes) > 0.0);
    }

    SECTION("trapezoid refinement converges at second order") {
        AuvParams weak = falcon;
        weak.tau_max = Wrench(50.0, 50.0, 20.0);
        weak.tau_min = -weak.tau_max;
        std::vector<Eigen::Vector3d> endpoints;
        for (int i = 1; i <= 5; ++i) {
            endpoints.emplace_back(0.08 * i * i, -0.05 * i, 0.1 * i);
        }
        const FlatTrajectory traj = solve_coefficients(
            Eigen::Vector3d::Zero(), Eigen::Vector3d(0.3, 0.0, 0.0), endpoints, cfg.segment_duration);

        auto violation_at = [&](int nc) {
            PlannerConfig c = cfg;
            c.quad_nodes = nc;
            return constraint_violation(traj, weak, c);
        };
        const double ref = violation_at(640);
        const double e20 = std::abs(violation_at(20) - ref);
        const double e40 = std::abs(violation_at(40) - ref);
        REQUIRE(e20 > 0.0);
        REQUIRE(e20 / std::max(e40, 1e-18) > 2.5);
    }
}

TEST_CASE("endpoint optimization", "[planner]") {
    const AuvParams falcon{};
    PlannerConfig cfg;
    Rng rng(47);

    // Converged-tracker scenario: posterior means on a slow track, small
    // covariance, AUV already on the standoff circle.
    const double t_now = 3.0;
    std::vector<std::pair<Eigen::Vector2d, Eigen::Matrix2d>> posteriors;
    std::vector<Eigen::Vector2d> schedule;
    for (int i = 1; i <= cfg.pieces; ++i) {
        const double t = t_now + i * cfg.segment_duration;
        posteriors.emplace_back(Eigen::Vector2d(0.5 * t, 0.3 * t),
                                0.01 * Eigen::Matrix2d::Identity());
        schedule.push_back(desired_bearing(t, cfg.omega));
    }
    const Eigen::Vector2d mu_now(0.5 * t_now, 0.3 * t_now);
    AuvState state;
    state.eta << mu_now[0] - 1.0, mu_now[1], 0.0;
    state.nu << 0.5, 0.2, 0.0;

    SECTION("initial guess is sane and the solver never regresses") {
        const auto init = initialize_endpoints(state, mu_now, posteriors, schedule, cfg, falcon);
        std::vector<Eigen::Vector2d> init_pos;
        for (const auto& e : init) init_pos.push_back(e.head<2>());
        const double f_init = similarity_cost(init_pos, schedule, posteriors, cfg.kappa);
        REQUIRE(f_init >= 0.0);

        const FlatTrajectory init_traj =
            solve_coefficients(state.eta, state.nu, init, cfg.segment_duration, t_now);
        const double j_init = -f_init + cfg.penalty_weight * constraint_violation(init_traj, falcon, cfg);

        const PlanResult plan =
            optimize_endpoints(state, t_now, posteriors, schedule, mu_now, falcon, cfg);
        REQUIRE_FALSE(plan.diag.degraded);
        REQUIRE(plan.diag.cost <= j_init + 1e-9);
        REQUIRE(plan.trajectory.pieces() == cfg.pieces);
        REQUIRE((plan.trajectory.value_piece(0, 0.0) - state.eta).norm() < 1e-9);
    }

    SECTION("weaker force limits never help the similarity") {
        double sum_full = 0.0, sum_weak = 0.0;
        for (int seed = 0; seed < 5; ++seed) {
            Rng r(100 + static_cast<std::uint64_t>(seed));
            AuvState s;
            s.eta << mu_now[0] - r.uniform(0.8, 1.5), mu_now[1] + r.uniform(-0.5, 0.5), 0.0;
            s.nu << r.uniform(-0.3, 0.3), 0.0, 0.0;

            const PlanResult full =
                optimize_endpoints(s, t_now, posteriors, schedule, mu_now, falcon, cfg);
            AuvParams weak = falcon;
            weak.tau_max *= 0.1;
            weak.tau_min *= 0.1;
            const PlanResult tight =
                optimize_endpoints(s, t_now, posteriors, schedule, mu_now, weak, cfg);
            sum_full += full.diag.similarity;
            sum_weak += tight.diag.similarity;
        }
        REQUIRE(sum_weak <= sum_full + 1e-6);
    }
}
