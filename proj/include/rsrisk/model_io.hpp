#pragma once

#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "rsrisk/calibration.hpp"
#include "rsrisk/fourier_risk.hpp"
#include "rsrisk/regime.hpp"

// JSON persistence for models and run configurations.  Doubles round-trip at
// full precision (shortest-representation serialization).

namespace rsrisk {

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json ghyp_to_json(const GhypParams& p) {
    return nlohmann::json{{"lambda", p.lambda},
                          {"alpha", p.alpha},
                          {"beta", p.beta},
                          {"scale", p.scale},
                          {"location", p.location}};
}

inline GhypParams ghyp_from_json(const nlohmann::json& j) {
    GhypParams p;
    p.lambda = j.at("lambda").get<double>();
    p.alpha = j.at("alpha").get<double>();
    p.beta = j.at("beta").get<double>();
    p.scale = j.at("scale").get<double>();
    p.location = j.at("location").get<double>();
    return p;
}

inline nlohmann::json model_to_json(const RegimeModel& model) {
    nlohmann::json assets = nlohmann::json::array();
    for (const auto& a : model.assets) {
        assets.push_back(nlohmann::json{{"name", a.name},
                                        {"common_mean", a.common_mean},
                                        {"state1", ghyp_to_json(a.state1)},
                                        {"state2", ghyp_to_json(a.state2)}});
    }
    return nlohmann::json{
        {"format_version", kModelFormatVersion},
        {"transition", {{"p11", model.transitions.p11}, {"p22", model.transitions.p22}}},
        {"assets", assets}};
}

inline RegimeModel model_from_json(const nlohmann::json& j) {
    if (!j.contains("format_version") || j.at("format_version").get<int>() != kModelFormatVersion) {
        throw DataError("model file: missing or unsupported format_version");
    }
    RegimeModel model;
    model.transitions.p11 = j.at("transition").at("p11").get<double>();
    model.transitions.p22 = j.at("transition").at("p22").get<double>();
    for (const auto& ja : j.at("assets")) {
        AssetStates a;
        a.name = ja.at("name").get<std::string>();
        a.common_mean = ja.at("common_mean").get<double>();
        a.state1 = ghyp_from_json(ja.at("state1"));
        a.state2 = ghyp_from_json(ja.at("state2"));
        model.assets.push_back(std::move(a));
    }
    model.validate();
    return model;
}

inline void save_model(const RegimeModel& model, const std::string& path,
                       const nlohmann::json& diagnostics = nlohmann::json()) {
    nlohmann::json j = model_to_json(model);
    if (!diagnostics.is_null()) j["diagnostics"] = diagnostics;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write model file: " + path);
    out << j.dump(2) << "\n";
}

inline RegimeModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("model file " + path + ": " + e.what());
    }
    return model_from_json(j);
}

inline nlohmann::json diagnostics_to_json(const CalibrationDiagnostics& d) {
    return nlohmann::json{{"objective", d.objective},
                          {"log_likelihood", d.log_likelihood},
                          {"penalty", d.penalty_value},
                          {"penalty_weight", d.penalty_weight},
                          {"converged", d.converged},
                          {"iterations", d.iterations},
                          {"evaluations", d.evaluations},
                          {"start_objectives", d.start_objectives},
                          {"objective_trace", d.objective_trace},
                          {"warnings", d.warnings}};
}

struct RunConfig {
    std::vector<std::string> asset_names;
    std::vector<std::string> price_paths;
    std::string calibration_start;
    std::string calibration_end;
    std::string backtest_start;
    std::string backtest_end;
    double level = 0.95;
    int horizon = 1;
    std::size_t burn_in = 0;
    CalibrationConfig calibration;
    InversionConfig inversion; // zero damping/freq_step mean engine defaults

    void validate() const {
        if (asset_names.empty() || asset_names.size() != price_paths.size()) {
            throw ConfigError("run config: prices must map asset names to paths");
        }
        if (!(level > 0.0 && level < 1.0)) throw ConfigError("run config: level in (0,1)");
        if (horizon < 1) throw ConfigError("run config: horizon must be >= 1");
        calibration.validate();
        if (!calibration_start.empty() && !calibration_end.empty() &&
            calibration_end < calibration_start) {
            throw ConfigError("run config: calibration window out of order");
        }
        if (!backtest_start.empty() && !backtest_end.empty() && backtest_end < backtest_start) {
            throw ConfigError("run config: backtest window out of order");
        }
        if (!calibration_end.empty() && !backtest_start.empty() &&
            backtest_start <= calibration_end) {
            throw ConfigError("run config: backtest window must start after the calibration window");
        }
    }
};

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    if (j.contains("prices")) {
        for (const auto& p : j.at("prices")) {
            cfg.asset_names.push_back(p.at("name").get<std::string>());
            cfg.price_paths.push_back(p.at("path").get<std::string>());
        }
    }
    if (j.contains("calibration_window")) {
        cfg.calibration_start = j.at("calibration_window").value("start", "");
        cfg.calibration_end = j.at("calibration_window").value("end", "");
    }
    if (j.contains("backtest_window")) {
        cfg.backtest_start = j.at("backtest_window").value("start", "");
        cfg.backtest_end = j.at("backtest_window").value("end", "");
    }
    cfg.level = j.value("level", 0.95);
    cfg.horizon = j.value("horizon", 1);
    cfg.burn_in = j.value("burn_in", std::size_t{0});
    if (j.contains("calibration")) {
        const auto& c = j.at("calibration");
        if (c.contains("penalty_weight") && !c.at("penalty_weight").is_null()) {
            cfg.calibration.penalty_weight = c.at("penalty_weight").get<double>();
        }
        cfg.calibration.penalty_lags = c.value("penalty_lags", cfg.calibration.penalty_lags);
        cfg.calibration.max_iterations = c.value("max_iterations", cfg.calibration.max_iterations);
        cfg.calibration.convergence_tol =
            c.value("convergence_tol", cfg.calibration.convergence_tol);
        cfg.calibration.restarts = c.value("restarts", cfg.calibration.restarts);
        cfg.calibration.seed = c.value("seed", cfg.calibration.seed);
    }
    if (j.contains("inversion")) {
        const auto& v = j.at("inversion");
        cfg.inversion.grid_size = v.value("grid_size", cfg.inversion.grid_size);
        cfg.inversion.freq_step = v.value("freq_step", cfg.inversion.freq_step);
        cfg.inversion.damping = v.value("damping", cfg.inversion.damping);
        cfg.inversion.center = v.value("center", cfg.inversion.center);
    }
    cfg.validate();
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("config file " + path + ": " + e.what());
    }
    return run_config_from_json(j);
}

} // namespace rsrisk
