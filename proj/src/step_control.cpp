#include "revode/step_control.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "revode/errors.hpp"

namespace revode {

ControllerConfig ControllerConfig::for_embedded_order(int k_emb) {
    ControllerConfig cfg;
    cfg.kp = 0.4 / (k_emb + 1.0);
    cfg.ki = 0.3 / (k_emb + 1.0);
    return cfg;
}

void ControllerConfig::validate() const {
    if (!(atol > 0.0) || !(rtol > 0.0)) throw ConfigError("controller: atol and rtol must be positive");
    if (!(h_min > 0.0) || !(h_min <= h_init) || !(h_init <= h_max)) {
        throw ConfigError("controller: need 0 < h_min <= h_init <= h_max");
    }
    if (!(safety > 0.0) || !(factor_min > 0.0) || !(factor_max > factor_min)) {
        throw ConfigError("controller: bad safety/clamp settings");
    }
}

nlohmann::json ControllerConfig::to_json() const {
    return {{"atol", atol},     {"rtol", rtol},   {"safety", safety},
            {"factor_min", factor_min}, {"factor_max", factor_max},
            {"kp", kp},         {"ki", ki},       {"h_init", h_init},
            {"h_min", h_min},   {"h_max", h_max}};
}

ControllerConfig ControllerConfig::from_json(const nlohmann::json& j) {
    ControllerConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "atol") cfg.atol = value.get<double>();
        else if (key == "rtol") cfg.rtol = value.get<double>();
        else if (key == "safety") cfg.safety = value.get<double>();
        else if (key == "factor_min") cfg.factor_min = value.get<double>();
        else if (key == "factor_max") cfg.factor_max = value.get<double>();
        else if (key == "kp") cfg.kp = value.get<double>();
        else if (key == "ki") cfg.ki = value.get<double>();
        else if (key == "h_init") cfg.h_init = value.get<double>();
        else if (key == "h_min") cfg.h_min = value.get<double>();
        else if (key == "h_max") cfg.h_max = value.get<double>();
        else throw ConfigError("controller config: unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

double error_norm(std::span<const double> estimate, std::span<const double> y_prev,
                  std::span<const double> y_next, const ControllerConfig& cfg) {
    const std::size_t d = estimate.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double scale = cfg.atol + cfg.rtol * std::max(std::abs(y_prev[i]), std::abs(y_next[i]));
        const double r = estimate[i] / scale;
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(d));
}

Proposal propose(double err, double err_prev, double h, const ControllerConfig& cfg) {
    const bool accept = err <= 1.0;
    const double e = std::max(err, 1e-10);
    const double ep = std::max(err_prev, 1e-10);
    double factor = cfg.safety * std::pow(e, -cfg.ki) * std::pow(ep / e, cfg.kp);
    factor = std::clamp(factor, cfg.factor_min, cfg.factor_max);
    const double h_next = h * factor;
    if (h_next < cfg.h_min) {
        throw StiffnessError("controller drove step size below h_min", 0.0, h_next);
    }
    return {accept, h_next};
}

double StepRecord::total_time() const {
    double s = 0.0;
    for (double hi : h) s += hi;
    return s;
}

void StepRecord::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << "step,h\n";
    char buf[64];
    for (std::size_t i = 0; i < h.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, h[i]);
        out << buf;
    }
}

nlohmann::json StepRecord::to_json() const {
    return {{"n_steps", h.size()},
            {"rejections", rejections},
            {"t0", t0},
            {"total_time", total_time()},
            {"err_prev_final", err_prev_final},
            {"obs_indices", obs_indices}};
}

}  // namespace revode
