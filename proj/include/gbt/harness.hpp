#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gbt/baselines.hpp"
#include "gbt/config.hpp"
#include "gbt/gp_tracker.hpp"
#include "gbt/planner.hpp"
#include "gbt/records.hpp"
#include "gbt/rng.hpp"
#include "gbt/sensing.hpp"
#include "gbt/targets.hpp"
#include "gbt/vehicle.hpp"

namespace gbt {

inline constexpr double kIntegrationDt = 1e-3; // RK4 step inside one control interval
inline constexpr double kWarmupRange = 1.5;    // assumed range before triangulation (m)

struct EpisodeResult {
    std::vector<StepRecord> records;
    RunSummary summary;
};

inline TargetModel make_target(const ScenarioConfig& cfg, Rng& rng) {
    const double t_end =
        cfg.duration + (cfg.planner.horizon + 2) * cfg.sensor.period + cfg.sensor.period;
    if (cfg.scenario.kind == "case1") return TargetModel::case1();
    if (cfg.scenario.kind == "case2") return TargetModel::case2();
    if (cfg.scenario.kind == "case3") {
        return TargetModel::case3(cfg.scenario.case3_psi0, cfg.scenario.fine_dt, t_end);
    }
    if (cfg.scenario.kind == "gp_sample") {
        return TargetModel::gp_sample(cfg.scenario.gp_length_scale, cfg.sensor.period, t_end, rng);
    }
    return TargetModel::custom(cfg.scenario.custom_waypoints);
}

/// Average prediction error over the horizon, coverage fraction, convergence
/// time and the rest of the run summary, all derived from the records.
inline RunSummary metrics(const std::vector<StepRecord>& records, double window_t0,
                          double window_t1) {
    RunSummary s;
    s.window_t0 = window_t0;
    s.window_t1 = window_t1;
    s.steps = static_cast<int>(records.size());
    if (records.empty()) return s;

    double sum_all = 0.0, sum_window = 0.0, sum_second = 0.0;
    int n_window = 0, n_second = 0, n_cov = 0;
    const double t_half = 0.5 * records.back().t;
    std::map<std::string, std::pair<double, int>> base_all;
    std::map<std::string, std::pair<double, int>> base_window;
    for (const auto& r : records) {
        sum_all += r.avg_err;
        s.max_err_all = std::max(s.max_err_all, r.avg_err);
        s.max_wrench_violation = std::max(s.max_wrench_violation, r.max_violation);
        if (r.coverage_ok) ++n_cov;
        if (r.t >= window_t0 && r.t <= window_t1) {
            sum_window += r.avg_err;
            ++n_window;
        }
        if (r.t >= t_half) {
            sum_second += r.avg_err;
            ++n_second;
        }
        for (const auto& [name, err] : r.baseline_avg_err) {
            base_all[name].first += err;
            base_all[name].second += 1;
            if (r.t >= window_t0 && r.t <= window_t1) {
                base_window[name].first += err;
                base_window[name].second += 1;
            }
        }
    }
    s.mean_err_all = sum_all / s.steps;
    s.mean_err_window = n_window > 0 ? sum_window / n_window : s.mean_err_all;
    s.mean_err_second_half = n_second > 0 ? sum_second / n_second : s.mean_err_all;
    s.coverage_fraction = static_cast<double>(n_cov) / s.steps;

    // First time after which the error never rises above 0.3 m again.
    for (std::size_t i = 0; i < records.size(); ++i) {
        bool sustained = true;
        for (std::size_t j = i; j < records.size(); ++j) {
            if (records[j].avg_err > 0.3) {
                sustained = false;
                break;
            }
        }
        if (sustained) {
            s.convergence_time = records[i].t;
            break;
        }
    }

    for (const auto& [name, acc] : base_all) {
        BaselineStats bs;
        bs.mean_err_all = acc.first / acc.second;
        const auto itw = base_window.find(name);
        bs.mean_err_window =
            (itw != base_window.end() && itw->second.second > 0)
                ? itw->second.first / itw->second.second
                : bs.mean_err_all;
        bs.final_err = records.back().baseline_avg_err.count(name)
                           ? records.back().baseline_avg_err.at(name)
                           : bs.mean_err_all;
        s.baselines[name] = bs;
    }
    return s;
}

namespace detail {

/// Crude target-position estimate available before the GP window fills:
/// pseudo-triangulation of the first and latest bearings, else a nominal
/// range along the latest bearing.
inline Eigen::Vector2d warmup_center(const SlidingDataset& window) {
    const BearingSample& last = window.back();
    if (window.size() >= 2) {
        if (const auto tri = triangulate_two_bearings(window.front(), last)) {
            return *tri;
        }
    }
    return last.p_auv + kWarmupRange * last.lambda;
}

struct IntervalOutcome {
    AuvState next;
    Eigen::Vector3d tau_abs_max = Eigen::Vector3d::Zero();
    double max_violation = 0.0;
};

/// Follow `tau_fn` open loop for one control interval, recording the applied
/// wrench extrema and the worst excess beyond the unscaled limits.
template <typename TauFn>
IntervalOutcome follow_interval(const AuvState& state, TauFn&& tau_fn, double t0, double T,
                                const AuvParams& veh) {
    IntervalOutcome out;
    out.next = integrate(state, tau_fn, t0, t0 + T, kIntegrationDt, veh);
    const int n = static_cast<int>(std::round(T / kIntegrationDt));
    for (int i = 0; i <= n; ++i) {
        const Wrench tau = tau_fn(t0 + std::min(T, i * kIntegrationDt));
        for (int c = 0; c < 3; ++c) {
            out.tau_abs_max[c] = std::max(out.tau_abs_max[c], std::abs(tau[c]));
            out.max_violation = std::max(out.max_violation, tau[c] - veh.tau_max[c]);
            out.max_violation = std::max(out.max_violation, veh.tau_min[c] - tau[c]);
        }
    }
    return out;
}

/// Standoff-circle approach used while the window is too small for GP
/// planning: endpoints head for the orbit guess around the crude center
/// estimate, clipped to the reachable ball around the ballistic point. The
/// approach fraction shrinks until the spline's wrench fits the scaled
/// limits, so warm-up steps never saturate the vehicle.
inline FlatTrajectory warmup_trajectory(const AuvState& state, const Eigen::Vector2d& center,
                                        double t_now, const AuvParams& veh,
                                        const PlannerConfig& cfg) {
    const double range = (center - state.position()).norm();
    const double standoff = std::min(cfg.standoff_max, std::max(cfg.standoff_min, range));
    const double a_cap =
        0.5 * cfg.gamma * std::min(veh.tau_max[0] / veh.Mx(), veh.tau_max[1] / veh.My());
    const double yaw_acc = 0.5 * cfg.gamma * veh.tau_max[2] / veh.Mpsi();
    const Eigen::Vector2d vel_world = (rotation_matrix(state.psi()) * state.nu).head<2>();
    const double yaw_rate0 = state.nu[2];
    const double psi0 = state.psi();
    const SplineSolver solver(cfg.pieces, cfg.segment_duration);

    FlatTrajectory best;
    for (const double scale : {1.0, 0.5, 0.25, 0.1, 0.0}) {
        std::vector<Eigen::Vector3d> endpoints;
        double prev_psi = psi0;
        for (int i = 1; i <= cfg.pieces; ++i) {
            const double dt = i * cfg.segment_duration;
            const Eigen::Vector2d goal =
                center - standoff * desired_bearing(t_now + dt, cfg.omega);
            const Eigen::Vector2d ballistic = state.position() + vel_world * dt;
            const Eigen::Vector2d offset = goal - ballistic;
            const double radius = scale * 0.5 * a_cap * dt * dt;
            const Eigen::Vector2d pos =
                offset.norm() > radius
                    ? Eigen::Vector2d(ballistic + (radius / std::max(offset.norm(), 1e-12)) * offset)
                    : goal;
            const Eigen::Vector2d aim = center - pos;
            const double raw = std::atan2(aim[1], aim[0]);
            const double unwrapped = unwrap_near(raw, prev_psi);
            const double hi = yaw_rate0 * dt + scale * 0.5 * yaw_acc * dt * dt;
            const double lo = yaw_rate0 * dt - scale * 0.5 * yaw_acc * dt * dt;
            const double psi = psi0 + std::clamp(unwrapped - psi0, lo, hi);
            prev_psi = psi;
            endpoints.emplace_back(pos[0], pos[1], psi);
        }
        best = solver.solve(state.eta, state.nu, endpoints, t_now);
        if (max_limit_excess(best, veh, cfg.quad_nodes) <= 0.0) break;
    }
    return best;
}

} // namespace detail

/// One full tracking episode (Algorithm-2 loop): sample a bearing, update the
/// window, tune and condition the GP, compute the bound, plan, and follow the
/// first interval open loop. Deterministic for a fixed config and seed. Any
/// library error aborts the episode, preserving the partial log in the
/// result with a failure note in the summary.
inline EpisodeResult run_episode(const ScenarioConfig& cfg) {
    EpisodeResult out;
    out.summary.seed = cfg.seed;
    out.summary.config_hash = config_hash(cfg);

    const PlannerConfig pcfg = cfg.resolved_planner();
    const double T = cfg.sensor.period;
    const int steps = static_cast<int>(std::round(cfg.duration / T));
    const MotionMode mode = motion_mode_from_string(cfg.mode);

    AuvParams veh = cfg.vehicle;
    veh.tau_max *= cfg.ability_scale;
    veh.tau_min *= cfg.ability_scale;

    try {
        cfg.validate();
        Rng rng(cfg.seed);
        const TargetModel target = make_target(cfg, rng);
        SlidingDataset window(static_cast<std::size_t>(cfg.sensor.capacity), T);

        KernelParams kernel;
        kernel.length_scale = cfg.tracker.l0;
        kernel.signal_var = cfg.tracker.sf2_0;
        kernel.noise_var = cfg.sensor.sigma_eps * cfg.sensor.sigma_eps;
        kernel.l_min = cfg.tracker.l_min;
        kernel.l_max = cfg.tracker.l_max;
        kernel.sf2_min = cfg.tracker.sf2_min;
        kernel.sf2_max = cfg.tracker.sf2_max;

        AuvState state;
        state.eta = cfg.auv_init.eta;
        state.nu = cfg.auv_init.nu;

        const bool use_plkf =
            std::find(cfg.baselines.begin(), cfg.baselines.end(), "plkf") != cfg.baselines.end();
        const bool use_pr =
            std::find(cfg.baselines.begin(), cfg.baselines.end(), "pr") != cfg.baselines.end();
        std::optional<PlkfState> plkf;
        std::optional<PolyFit> pr_fit;

        TuneOptions tune_opt;
        tune_opt.max_iters = cfg.tracker.tune_max_iters;

        for (int k = 0; k < steps; ++k) {
            const auto tick = std::chrono::steady_clock::now();
            const double t_k = k * T;
            const Eigen::Vector2d truth = target.position(t_k);

            const Eigen::Vector2d lam =
                measure_bearing(truth, state.position(), cfg.sensor.sigma_eps, rng);
            window.push({t_k, lam, state.position()});

            if (cfg.tracker.tune_every_k > 0 && window.size() >= 3 &&
                k % cfg.tracker.tune_every_k == 0) {
                kernel = tune_hyperparameters(window, kernel, tune_opt);
            }
            const GpPosterior gp = build_posterior(window, kernel);

            std::vector<double> horizon(static_cast<std::size_t>(pcfg.horizon) + 1);
            for (std::size_t i = 0; i < horizon.size(); ++i) horizon[i] = t_k + i * T;
            std::vector<Prediction> preds(horizon.size());
            for (std::size_t i = 0; i < horizon.size(); ++i) preds[i] = predict(gp, horizon[i]);
            const auto bounds = error_bound(gp, horizon, cfg.tracker.delta, window);

            StepRecord rec;
            rec.k = k;
            rec.t = t_k;
            rec.target = truth;
            rec.eta = state.eta;
            rec.nu = state.nu;
            rec.bearing = lam;
            rec.ccbm = bounds[0].ccbm_value;
            rec.bound = bounds[0].beta * bounds[0].sigma_bar;
            rec.horizon_times = horizon;

            double err_sum = 0.0;
            bool covered = true;
            rec.horizon_mean.reserve(horizon.size());
            for (std::size_t i = 0; i < horizon.size(); ++i) {
                const Eigen::Vector2d tp = target.position(horizon[i]);
                const double err = (preds[i].mean - tp).norm();
                err_sum += err;
                if (err > bounds[i].beta * bounds[i].sigma_bar) covered = false;
                rec.horizon_mean.push_back(preds[i].mean);
            }
            rec.avg_err = err_sum / static_cast<double>(horizon.size());
            rec.coverage_ok = covered;

            // Baseline estimators consume the identical measurement stream.
            if (use_plkf) {
                const BearingSample& sample = window.back();
                if (!plkf && window.size() >= 2) {
                    for (std::size_t i = 0; i + 1 < window.size() && !plkf; ++i) {
                        if (const auto tri = triangulate_two_bearings(window[i], sample)) {
                            PlkfState ps;
                            ps.mean << (*tri)[0], (*tri)[1], 0.0, 0.0;
                            ps.cov = Eigen::Vector4d(10.0, 10.0, 4.0, 4.0).asDiagonal();
                            plkf = ps;
                        }
                    }
                } else if (plkf) {
                    plkf = plkf_step(*plkf, sample, T, cfg.plkf_q_accel, cfg.sensor.sigma_eps);
                }
                double sum = 0.0;
                for (std::size_t i = 0; i < horizon.size(); ++i) {
                    const Eigen::Vector2d tp = target.position(horizon[i]);
                    Eigen::Vector2d est;
                    if (plkf) {
                        est = plkf->mean.head<2>() + plkf->mean.tail<2>() * (horizon[i] - t_k);
                    } else {
                        est = state.position() + kWarmupRange * lam;
                    }
                    sum += (est - tp).norm();
                }
                rec.baseline_avg_err["plkf"] = sum / static_cast<double>(horizon.size());
            }
            if (use_pr) {
                const int order_eff =
                    std::min(cfg.pr_order, static_cast<int>(window.size()) / 2 - 1);
                if (order_eff >= 1) {
                    try {
                        pr_fit = poly_fit(window, order_eff);
                    } catch (const DegenerateGeometryError&) {
                        // keep the previous fit
                    }
                }
                double sum = 0.0;
                for (std::size_t i = 0; i < horizon.size(); ++i) {
                    const Eigen::Vector2d tp = target.position(horizon[i]);
                    const Eigen::Vector2d est = pr_fit
                                                    ? pr_fit->predict(horizon[i])
                                                    : Eigen::Vector2d(state.position() +
                                                                      kWarmupRange * lam);
                    sum += (est - tp).norm();
                }
                rec.baseline_avg_err["pr"] = sum / static_cast<double>(horizon.size());
            }

            // Act for one control interval.
            switch (mode) {
            case MotionMode::gbt: {
                FlatTrajectory traj;
                if (window.size() < 3) {
                    const Eigen::Vector2d center = detail::warmup_center(window);
                    traj = detail::warmup_trajectory(state, center, t_k, veh, pcfg);
                } else {
                    std::vector<std::pair<Eigen::Vector2d, Eigen::Matrix2d>> posteriors;
                    std::vector<Eigen::Vector2d> schedule;
                    posteriors.reserve(static_cast<std::size_t>(pcfg.pieces));
                    for (int i = 1; i <= pcfg.pieces; ++i) {
                        const auto& pr = preds[static_cast<std::size_t>(i)];
                        posteriors.emplace_back(
                            pr.mean, pr.cov + kernel.noise_var * Eigen::Matrix2d::Identity());
                        schedule.push_back(desired_bearing(t_k + i * T, pcfg.omega));
                    }
                    PlanResult plan = optimize_endpoints(state, t_k, posteriors, schedule,
                                                         preds[0].mean, veh, pcfg);
                    traj = std::move(plan.trajectory);
                    rec.cost = plan.diag.similarity;
                    rec.penalty = plan.diag.penalty;
                    rec.iters = plan.diag.iterations;
                }
                const auto applied = detail::follow_interval(
                    state, [&](double t) { return traj.wrench_at(t, veh); }, t_k, T, veh);
                state = applied.next;
                rec.tau_abs_max = applied.tau_abs_max;
                rec.max_violation = applied.max_violation;
                break;
            }
            case MotionMode::static_hold: {
                const auto applied = detail::follow_interval(
                    state, [](double) { return Wrench::Zero(); }, t_k, T, veh);
                state = applied.next;
                break;
            }
            case MotionMode::random: {
                const MotionCommand cmd = motion_policy(mode, veh, rng, std::nullopt);
                const auto applied = detail::follow_interval(
                    state, [&](double) { return cmd.wrench; }, t_k, T, veh);
                state = applied.next;
                rec.tau_abs_max = cmd.wrench.cwiseAbs();
                break;
            }
            case MotionMode::direct_placement: {
                const Eigen::Vector2d mu_now =
                    window.size() < 3 ? detail::warmup_center(window) : preds[0].mean;
                const Eigen::Vector2d mu_next =
                    window.size() < 3 ? mu_now : preds[1].mean;
                const double range = (mu_now - state.position()).norm();
                PlacementTarget pt;
                pt.mu_next = mu_next;
                pt.lambda_star_next = desired_bearing(t_k + T, pcfg.omega);
                pt.standoff =
                    std::min(pcfg.standoff_max, std::max(pcfg.standoff_min, range));
                const MotionCommand cmd = motion_policy(mode, veh, rng, pt);
                state.eta.head<2>() = cmd.placed_pose->head<2>();
                state.eta[2] = detail::unwrap_near((*cmd.placed_pose)[2], state.eta[2]);
                state.nu.setZero();
                break;
            }
            }

            rec.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                               tick)
                         .count();
            out.records.push_back(std::move(rec));
        }
    } catch (const Error& e) {
        const RunSummary partial = metrics(out.records, 0.5 * cfg.duration, cfg.duration);
        out.summary = partial;
        out.summary.seed = cfg.seed;
        out.summary.config_hash = config_hash(cfg);
        out.summary.failed = true;
        out.summary.failure = e.what();
        return out;
    }

    const auto seed = out.summary.seed;
    const auto hash = out.summary.config_hash;
    out.summary = metrics(out.records, 0.5 * cfg.duration, cfg.duration);
    out.summary.seed = seed;
    out.summary.config_hash = hash;
    return out;
}

struct SweepCell {
    std::string name;
    ScenarioConfig config;
    EpisodeResult result;
};

struct SweepResult {
    std::string kind;
    std::vector<SweepCell> cells;
};

inline int sweep_thread_cap() {
    if (const char* env = std::getenv("GBT_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

namespace detail {

inline void run_cells(std::vector<SweepCell>& cells) {
    const int threads = std::min<int>(sweep_thread_cap(), static_cast<int>(cells.size()));
    if (threads <= 1) {
        for (auto& c : cells) c.result = run_episode(c.config);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            cells[i].result = run_episode(cells[i].config);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

} // namespace detail

/// Comparative studies over shared seeds. `motion_modes` runs
/// gbt/static/random/direct placements; `ability` scales the force limits;
/// `baselines` attaches the PLKF and PR estimators to GBT runs. Episode
/// failures stay inside their cell.
inline SweepResult sweep(const std::string& kind, const ScenarioConfig& base, int n_seeds) {
    if (n_seeds < 1) throw ConfigError("sweep needs at least one seed");
    SweepResult out;
    out.kind = kind;

    auto add_cell = [&](const std::string& name, ScenarioConfig cfg, std::uint64_t seed) {
        cfg.seed = seed;
        out.cells.push_back({name + "/seed" + std::to_string(seed), std::move(cfg), {}});
    };

    if (kind == "motion_modes") {
        for (const char* mode : {"gbt", "static", "random", "direct_placement"}) {
            for (int s = 0; s < n_seeds; ++s) {
                ScenarioConfig cfg = base;
                cfg.mode = mode;
                add_cell(mode, std::move(cfg), base.seed + static_cast<std::uint64_t>(s));
            }
        }
    } else if (kind == "ability") {
        for (const double scale : {0.1, 0.25, 0.5, 1.0}) {
            for (int s = 0; s < n_seeds; ++s) {
                ScenarioConfig cfg = base;
                cfg.mode = "gbt";
                cfg.ability_scale = scale;
                add_cell("ability" + std::to_string(static_cast<int>(scale * 100)), std::move(cfg),
                         base.seed + static_cast<std::uint64_t>(s));
            }
        }
        for (int s = 0; s < n_seeds; ++s) {
            ScenarioConfig cfg = base;
            cfg.mode = "direct_placement";
            add_cell("direct", std::move(cfg), base.seed + static_cast<std::uint64_t>(s));
        }
    } else if (kind == "baselines") {
        for (int s = 0; s < n_seeds; ++s) {
            ScenarioConfig cfg = base;
            cfg.mode = "gbt";
            cfg.baselines = {"plkf", "pr"};
            add_cell("gbt+baselines", std::move(cfg), base.seed + static_cast<std::uint64_t>(s));
        }
    } else {
        throw ConfigError("unknown sweep kind '" + kind + "' (motion_modes|ability|baselines)");
    }

    detail::run_cells(out.cells);
    return out;
}

} // namespace gbt
