#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gbt/baselines.hpp"
#include "gbt/errors.hpp"
#include "gbt/planner.hpp"
#include "gbt/vehicle.hpp"

namespace gbt {

using json = nlohmann::json;

struct ScenarioSection {
    std::string kind = "case1"; // case1|case2|case3|gp_sample|custom
    double gp_length_scale = 2.0;
    double case3_psi0 = 0.0;
    double fine_dt = 1e-3;
    std::vector<std::pair<double, Eigen::Vector2d>> custom_waypoints;
};

struct SensorSection {
    double period = 0.1;     // T (s)
    double sigma_eps = 0.001; // m
    int capacity = 20;       // N_c
};

struct TrackerSection {
    double l0 = 1.0;
    double sf2_0 = 1.0;
    double l_min = 0.05, l_max = 50.0;
    double sf2_min = 1e-4, sf2_max = 1e4;
    double delta = 0.05;
    int tune_every_k = 1; // 0 disables tuning entirely
    int tune_max_iters = 50;
};

struct AuvInitSection {
    Eigen::Vector3d eta{1.5, 0.0, M_PI / 2.0};
    Eigen::Vector3d nu = Eigen::Vector3d::Zero();
};

/// Fully resolved scenario description; the JSON surface fills any subset of
/// the fields and everything else keeps these defaults.
struct ScenarioConfig {
    ScenarioSection scenario;
    AuvParams vehicle;
    SensorSection sensor;
    TrackerSection tracker;
    PlannerConfig planner;
    std::string mode = "gbt"; // gbt|static|random|direct_placement
    double ability_scale = 1.0;
    std::vector<std::string> baselines; // subset of {plkf, pr}
    double plkf_q_accel = 0.1;
    int pr_order = 4;
    AuvInitSection auv_init;
    double duration = 20.0;
    std::uint64_t seed = 0;
    std::string output_format = "csv";

    void validate() const {
        vehicle.validate();
        PlannerConfig pc = planner;
        pc.segment_duration = sensor.period;
        pc.validate();
        if (!(sensor.period > 0.0)) throw ConfigError("sensor.period must be positive");
        if (!(sensor.sigma_eps >= 0.0)) throw ConfigError("sensor.sigma_eps must be nonnegative");
        if (sensor.capacity < 1) throw ConfigError("sensor.capacity must be at least 1");
        if (!(tracker.l_min > 0.0 && tracker.l_max >= tracker.l_min)) {
            throw ConfigError("tracker length-scale bounds are invalid");
        }
        if (!(tracker.sf2_min > 0.0 && tracker.sf2_max >= tracker.sf2_min)) {
            throw ConfigError("tracker signal-variance bounds are invalid");
        }
        if (!(tracker.l0 >= tracker.l_min && tracker.l0 <= tracker.l_max)) {
            throw ConfigError("tracker.l0 outside its bounds");
        }
        if (!(tracker.sf2_0 >= tracker.sf2_min && tracker.sf2_0 <= tracker.sf2_max)) {
            throw ConfigError("tracker.sf2_0 outside its bounds");
        }
        if (!(tracker.delta > 0.0 && tracker.delta <= 1.0)) {
            throw ConfigError("tracker.delta outside (0, 1]");
        }
        if (tracker.tune_every_k < 0) throw ConfigError("tracker.tune_every_k must be >= 0");
        motion_mode_from_string(mode);
        if (!(ability_scale > 0.0)) throw ConfigError("ability_scale must be positive");
        for (const auto& b : baselines) {
            if (b != "plkf" && b != "pr") throw ConfigError("unknown baseline '" + b + "'");
        }
        if (!(plkf_q_accel > 0.0)) throw ConfigError("plkf_q_accel must be positive");
        if (pr_order < 1) throw ConfigError("pr_order must be at least 1");
        if (!(duration > 0.0)) throw ConfigError("duration must be positive");
        if (output_format != "csv" && output_format != "json") {
            throw ConfigError("output_format must be csv or json");
        }
        const std::set<std::string> kinds{"case1", "case2", "case3", "gp_sample", "custom"};
        if (!kinds.count(scenario.kind)) {
            throw ConfigError("scenario.kind must be one of case1|case2|case3|gp_sample|custom");
        }
        if (scenario.kind == "custom" && scenario.custom_waypoints.size() < 2) {
            throw ConfigError("scenario.custom_waypoints needs at least two entries");
        }
        if (!(scenario.gp_length_scale > 0.0)) {
            throw ConfigError("scenario.gp_length_scale must be positive");
        }
        if (!(scenario.fine_dt > 0.0)) throw ConfigError("scenario.fine_dt must be positive");
    }

    /// Planner options with the segment duration bound to the sensor period.
    PlannerConfig resolved_planner() const {
        PlannerConfig pc = planner;
        pc.segment_duration = sensor.period;
        return pc;
    }
};

namespace detail {

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
void read_field(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

inline void read_vec3(const json& j, const char* key, Eigen::Vector3d& out,
                      const std::string& where) {
    if (!j.contains(key)) return;
    const auto& arr = j.at(key);
    if (!arr.is_array() || arr.size() != 3) {
        throw ConfigError(where + "." + key + ": expected an array of 3 numbers");
    }
    for (int i = 0; i < 3; ++i) {
        if (!arr[static_cast<std::size_t>(i)].is_number()) {
            throw ConfigError(where + "." + key + ": expected numbers");
        }
        out[i] = arr[static_cast<std::size_t>(i)].get<double>();
    }
}

} // namespace detail

inline ScenarioConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("configuration root must be a JSON object");
    ScenarioConfig cfg;
    detail::reject_unknown_keys(
        j,
        {"scenario", "vehicle", "sensor", "tracker", "planner", "mode", "ability_scale",
         "baselines", "plkf_q_accel", "pr_order", "auv_init", "duration", "seed", "output_format"},
        "config");

    if (j.contains("scenario")) {
        const auto& s = j.at("scenario");
        detail::reject_unknown_keys(
            s, {"kind", "gp_length_scale", "case3_psi0", "fine_dt", "custom_waypoints"},
            "scenario");
        detail::read_field(s, "kind", cfg.scenario.kind, "scenario");
        detail::read_field(s, "gp_length_scale", cfg.scenario.gp_length_scale, "scenario");
        detail::read_field(s, "case3_psi0", cfg.scenario.case3_psi0, "scenario");
        detail::read_field(s, "fine_dt", cfg.scenario.fine_dt, "scenario");
        if (s.contains("custom_waypoints")) {
            const auto& w = s.at("custom_waypoints");
            if (!w.is_array()) throw ConfigError("scenario.custom_waypoints must be an array");
            for (const auto& entry : w) {
                if (!entry.is_array() || entry.size() != 3) {
                    throw ConfigError("scenario.custom_waypoints entries must be [t, x, y]");
                }
                cfg.scenario.custom_waypoints.emplace_back(
                    entry[0].get<double>(),
                    Eigen::Vector2d(entry[1].get<double>(), entry[2].get<double>()));
            }
        }
    }

    if (j.contains("vehicle")) {
        const auto& v = j.at("vehicle");
        detail::reject_unknown_keys(v,
                                    {"m", "I_z", "X_du", "Y_dv", "N_dr", "X_u", "Y_v", "N_r",
                                     "D_u", "D_v", "D_r", "tau_max", "tau_min"},
                                    "vehicle");
        detail::read_field(v, "m", cfg.vehicle.m, "vehicle");
        detail::read_field(v, "I_z", cfg.vehicle.I_z, "vehicle");
        detail::read_field(v, "X_du", cfg.vehicle.X_du, "vehicle");
        detail::read_field(v, "Y_dv", cfg.vehicle.Y_dv, "vehicle");
        detail::read_field(v, "N_dr", cfg.vehicle.N_dr, "vehicle");
        detail::read_field(v, "X_u", cfg.vehicle.X_u, "vehicle");
        detail::read_field(v, "Y_v", cfg.vehicle.Y_v, "vehicle");
        detail::read_field(v, "N_r", cfg.vehicle.N_r, "vehicle");
        detail::read_field(v, "D_u", cfg.vehicle.D_u, "vehicle");
        detail::read_field(v, "D_v", cfg.vehicle.D_v, "vehicle");
        detail::read_field(v, "D_r", cfg.vehicle.D_r, "vehicle");
        detail::read_vec3(v, "tau_max", cfg.vehicle.tau_max, "vehicle");
        detail::read_vec3(v, "tau_min", cfg.vehicle.tau_min, "vehicle");
        if (v.contains("m") && !(cfg.vehicle.m > 0.0)) {
            throw ConfigError("vehicle.m: mass must be positive");
        }
    }

    if (j.contains("sensor")) {
        const auto& s = j.at("sensor");
        detail::reject_unknown_keys(s, {"period", "sigma_eps", "capacity"}, "sensor");
        detail::read_field(s, "period", cfg.sensor.period, "sensor");
        detail::read_field(s, "sigma_eps", cfg.sensor.sigma_eps, "sensor");
        detail::read_field(s, "capacity", cfg.sensor.capacity, "sensor");
    }

    if (j.contains("tracker")) {
        const auto& t = j.at("tracker");
        detail::reject_unknown_keys(t,
                                    {"l0", "sf2_0", "l_min", "l_max", "sf2_min", "sf2_max",
                                     "delta", "tune_every_k", "tune_max_iters"},
                                    "tracker");
        detail::read_field(t, "l0", cfg.tracker.l0, "tracker");
        detail::read_field(t, "sf2_0", cfg.tracker.sf2_0, "tracker");
        detail::read_field(t, "l_min", cfg.tracker.l_min, "tracker");
        detail::read_field(t, "l_max", cfg.tracker.l_max, "tracker");
        detail::read_field(t, "sf2_min", cfg.tracker.sf2_min, "tracker");
        detail::read_field(t, "sf2_max", cfg.tracker.sf2_max, "tracker");
        detail::read_field(t, "delta", cfg.tracker.delta, "tracker");
        detail::read_field(t, "tune_every_k", cfg.tracker.tune_every_k, "tracker");
        detail::read_field(t, "tune_max_iters", cfg.tracker.tune_max_iters, "tracker");
    }

    if (j.contains("planner")) {
        const auto& p = j.at("planner");
        detail::reject_unknown_keys(p,
                                    {"pieces", "horizon", "omega", "kappa", "quad_nodes", "gamma",
                                     "penalty_weight", "smoothing_width", "max_iters", "tol",
                                     "standoff_min", "standoff_max", "range_weight"},
                                    "planner");
        detail::read_field(p, "pieces", cfg.planner.pieces, "planner");
        detail::read_field(p, "horizon", cfg.planner.horizon, "planner");
        detail::read_field(p, "omega", cfg.planner.omega, "planner");
        detail::read_field(p, "kappa", cfg.planner.kappa, "planner");
        detail::read_field(p, "quad_nodes", cfg.planner.quad_nodes, "planner");
        detail::read_field(p, "gamma", cfg.planner.gamma, "planner");
        detail::read_field(p, "penalty_weight", cfg.planner.penalty_weight, "planner");
        detail::read_field(p, "smoothing_width", cfg.planner.smoothing_width, "planner");
        detail::read_field(p, "max_iters", cfg.planner.max_iters, "planner");
        detail::read_field(p, "tol", cfg.planner.tol, "planner");
        detail::read_field(p, "standoff_min", cfg.planner.standoff_min, "planner");
        detail::read_field(p, "standoff_max", cfg.planner.standoff_max, "planner");
        detail::read_field(p, "range_weight", cfg.planner.range_weight, "planner");
    }

    if (j.contains("auv_init")) {
        const auto& a = j.at("auv_init");
        detail::reject_unknown_keys(a, {"eta", "nu"}, "auv_init");
        detail::read_vec3(a, "eta", cfg.auv_init.eta, "auv_init");
        detail::read_vec3(a, "nu", cfg.auv_init.nu, "auv_init");
    }

    detail::read_field(j, "mode", cfg.mode, "config");
    detail::read_field(j, "ability_scale", cfg.ability_scale, "config");
    detail::read_field(j, "baselines", cfg.baselines, "config");
    detail::read_field(j, "plkf_q_accel", cfg.plkf_q_accel, "config");
    detail::read_field(j, "pr_order", cfg.pr_order, "config");
    detail::read_field(j, "duration", cfg.duration, "config");
    detail::read_field(j, "seed", cfg.seed, "config");
    detail::read_field(j, "output_format", cfg.output_format, "config");

    cfg.validate();
    return cfg;
}

inline json config_to_json(const ScenarioConfig& cfg) {
    json j;
    j["scenario"]["kind"] = cfg.scenario.kind;
    j["scenario"]["gp_length_scale"] = cfg.scenario.gp_length_scale;
    j["scenario"]["case3_psi0"] = cfg.scenario.case3_psi0;
    j["scenario"]["fine_dt"] = cfg.scenario.fine_dt;
    if (!cfg.scenario.custom_waypoints.empty()) {
        json w = json::array();
        for (const auto& [t, p] : cfg.scenario.custom_waypoints) {
            w.push_back({t, p[0], p[1]});
        }
        j["scenario"]["custom_waypoints"] = w;
    }
    j["vehicle"] = {{"m", cfg.vehicle.m},
                    {"I_z", cfg.vehicle.I_z},
                    {"X_du", cfg.vehicle.X_du},
                    {"Y_dv", cfg.vehicle.Y_dv},
                    {"N_dr", cfg.vehicle.N_dr},
                    {"X_u", cfg.vehicle.X_u},
                    {"Y_v", cfg.vehicle.Y_v},
                    {"N_r", cfg.vehicle.N_r},
                    {"D_u", cfg.vehicle.D_u},
                    {"D_v", cfg.vehicle.D_v},
                    {"D_r", cfg.vehicle.D_r},
                    {"tau_max", {cfg.vehicle.tau_max[0], cfg.vehicle.tau_max[1], cfg.vehicle.tau_max[2]}},
                    {"tau_min", {cfg.vehicle.tau_min[0], cfg.vehicle.tau_min[1], cfg.vehicle.tau_min[2]}}};
    j["sensor"] = {{"period", cfg.sensor.period},
                   {"sigma_eps", cfg.sensor.sigma_eps},
                   {"capacity", cfg.sensor.capacity}};
    j["tracker"] = {{"l0", cfg.tracker.l0},
                    {"sf2_0", cfg.tracker.sf2_0},
                    {"l_min", cfg.tracker.l_min},
                    {"l_max", cfg.tracker.l_max},
                    {"sf2_min", cfg.tracker.sf2_min},
                    {"sf2_max", cfg.tracker.sf2_max},
                    {"delta", cfg.tracker.delta},
                    {"tune_every_k", cfg.tracker.tune_every_k},
                    {"tune_max_iters", cfg.tracker.tune_max_iters}};
    j["planner"] = {{"pieces", cfg.planner.pieces},
                    {"horizon", cfg.planner.horizon},
                    {"omega", cfg.planner.omega},
                    {"kappa", cfg.planner.kappa},
                    {"quad_nodes", cfg.planner.quad_nodes},
                    {"gamma", cfg.planner.gamma},
                    {"penalty_weight", cfg.planner.penalty_weight},
                    {"smoothing_width", cfg.planner.smoothing_width},
                    {"max_iters", cfg.planner.max_iters},
                    {"tol", cfg.planner.tol},
                    {"standoff_min", cfg.planner.standoff_min},
                    {"standoff_max", cfg.planner.standoff_max},
                    {"range_weight", cfg.planner.range_weight}};
    j["mode"] = cfg.mode;
    j["ability_scale"] = cfg.ability_scale;
    j["baselines"] = cfg.baselines;
    j["plkf_q_accel"] = cfg.plkf_q_accel;
    j["pr_order"] = cfg.pr_order;
    j["auv_init"] = {{"eta", {cfg.auv_init.eta[0], cfg.auv_init.eta[1], cfg.auv_init.eta[2]}},
                     {"nu", {cfg.auv_init.nu[0], cfg.auv_init.nu[1], cfg.auv_init.nu[2]}}};
    j["duration"] = cfg.duration;
    j["seed"] = cfg.seed;
    j["output_format"] = cfg.output_format;
    return j;
}

/// FNV-1a hash of the canonical (sorted-key) serialization.
inline std::string config_hash(const ScenarioConfig& cfg) {
    const std::string dump = config_to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("failed to parse '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

} // namespace gbt
