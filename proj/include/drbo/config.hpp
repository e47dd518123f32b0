#pragma once

#include <fstream>
#include <string>

#include "json.hpp"

#include "drbo/errors.hpp"
#include "drbo/harness.hpp"

namespace drbo {

/// Parse a JSON object into a RunConfig. Unknown keys are rejected so config
/// typos fail before any compute. All keys optional; defaults as in RunConfig.
inline RunConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw invalid_input("config: expected a JSON object");
    RunConfig cfg;
    for (const auto& [key, val] : j.items()) {
        try {
            if (key == "environment") cfg.environment = val.get<std::string>();
            else if (key == "policy") cfg.policy = val.get<std::string>();
            else if (key == "horizon") cfg.horizon = val.get<int>();
            else if (key == "seeds") cfg.seeds = val.get<std::vector<std::uint64_t>>();
            else if (key == "kernel_family") cfg.kernel_family = val.get<std::string>();
            else if (key == "kernel_lengthscale") cfg.kernel_lengthscale = val.get<double>();
            else if (key == "kernel_variance") cfg.kernel_variance = val.get<double>();
            else if (key == "mmd_kernel_family") cfg.mmd_kernel_family = val.get<std::string>();
            else if (key == "mmd_kernel_lengthscale") cfg.mmd_kernel_lengthscale = val.get<double>();
            else if (key == "beta") cfg.beta = val.is_string() ? val.get<std::string>() : std::to_string(val.get<double>());
            else if (key == "rkhs_bound") cfg.rkhs_bound = val.get<double>();
            else if (key == "delta") cfg.delta = val.get<double>();
            else if (key == "delta_denominator") cfg.delta_denominator = val.get<int>();
            else if (key == "epsilon_mode") cfg.epsilon_mode = val.get<std::string>();
            else if (key == "epsilon0") cfg.epsilon0 = val.get<double>();
            else if (key == "margin_delta") cfg.margin_delta = val.get<double>();
            else if (key == "solver_tol") cfg.solver_tol = val.get<double>();
            else if (key == "noise_sigma") cfg.noise_sigma = val.get<double>();
            else if (key == "grid_size") cfg.grid_size = val.get<int>();
            else if (key == "out_dir") cfg.out_dir = val.get<std::string>();
            else if (key == "wind_csv") cfg.wind_csv = val.get<std::string>();
            else if (key == "synthetic_wind_length") cfg.synthetic_wind_length = val.get<int>();
            else if (key == "wind_window") cfg.wind_window = val.get<int>();
            else if (key == "sim_budget") cfg.sim_budget = val.get<int>();
            else if (key == "sim_steps_per_hour") cfg.sim_steps_per_hour = val.get<int>();
            else throw invalid_input("config: unknown key '" + key + "'");
        } catch (const nlohmann::json::exception& e) {
            throw invalid_input("config: bad value for '" + key + "': " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_input("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw invalid_input("config: parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

inline nlohmann::json config_to_json(const RunConfig& cfg) {
    return nlohmann::json{{"environment", cfg.environment},
                          {"policy", cfg.policy},
                          {"horizon", cfg.horizon},
                          {"seeds", cfg.seeds},
                          {"kernel_family", cfg.kernel_family},
                          {"kernel_lengthscale", cfg.kernel_lengthscale},
                          {"kernel_variance", cfg.kernel_variance},
                          {"mmd_kernel_family", cfg.mmd_kernel_family},
                          {"mmd_kernel_lengthscale", cfg.mmd_kernel_lengthscale},
                          {"beta", cfg.beta},
                          {"rkhs_bound", cfg.rkhs_bound},
                          {"delta", cfg.delta},
                          {"delta_denominator", cfg.delta_denominator},
                          {"epsilon_mode", cfg.epsilon_mode},
                          {"epsilon0", cfg.epsilon0},
                          {"margin_delta", cfg.margin_delta},
                          {"solver_tol", cfg.solver_tol},
                          {"noise_sigma", cfg.noise_sigma},
                          {"grid_size", cfg.grid_size},
                          {"out_dir", cfg.out_dir},
                          {"wind_csv", cfg.wind_csv},
                          {"synthetic_wind_length", cfg.synthetic_wind_length},
                          {"wind_window", cfg.wind_window},
                          {"sim_budget", cfg.sim_budget},
                          {"sim_steps_per_hour", cfg.sim_steps_per_hour}};
}

}  // namespace drbo
