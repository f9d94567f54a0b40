#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace gbt {

/// Per-step log row. The first block maps one-to-one onto the fixed CSV
/// schema; the fields after it are in-memory extras for plots and summaries.
struct StepRecord {
    int k = 0;
    double t = 0.0;
    Eigen::Vector2d target = Eigen::Vector2d::Zero(); // truth at t_k
    Eigen::Vector3d eta = Eigen::Vector3d::Zero();    // AUV pose at t_k
    Eigen::Vector3d nu = Eigen::Vector3d::Zero();     // body velocities at t_k
    Eigen::Vector3d tau_abs_max = Eigen::Vector3d::Zero(); // |tau| extrema over the interval
    Eigen::Vector2d bearing = Eigen::Vector2d::UnitX();
    double avg_err = 0.0; // mean tracking error over the prediction horizon
    double bound = 0.0;   // beta * sigma_bar at t_k
    double ccbm = 0.0;
    double cost = 0.0;    // planner similarity F-hat
    double penalty = 0.0; // planner constraint violation I-hat
    int iters = 0;
    double ms = 0.0; // wall time of the step

    // Extras (not part of the CSV schema).
    std::vector<double> horizon_times;
    std::vector<Eigen::Vector2d> horizon_mean;
    bool coverage_ok = true;    // Theorem-1 event over the horizon
    double max_violation = 0.0; // wrench excess beyond the unscaled limits
    std::map<std::string, double> baseline_avg_err;
};

struct BaselineStats {
    double mean_err_all = 0.0;
    double mean_err_window = 0.0; // over the summary window
    double final_err = 0.0;
};

/// Aggregates derived purely from the step records.
struct RunSummary {
    int steps = 0;
    double window_t0 = 10.0;
    double window_t1 = 20.0;
    double mean_err_all = 0.0;
    double max_err_all = 0.0;
    double mean_err_window = 0.0;
    double mean_err_second_half = 0.0;
    double convergence_time = -1.0; // first sustained avg_err <= 0.3 m, -1 if never
    double coverage_fraction = 0.0;
    double max_wrench_violation = 0.0;
    std::uint64_t seed = 0;
    std::string config_hash;
    bool failed = false;
    std::string failure;
    std::map<std::string, BaselineStats> baselines;
};

} // namespace gbt
