#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace revode {

// PI controller configuration. Gains default to the widely used pair
// (0.4, 0.3) scaled by 1/(k_emb + 1).
struct ControllerConfig {
    double atol = 1e-6;
    double rtol = 1e-6;
    double safety = 0.9;
    double factor_min = 0.2;   // growth clamp, lower bound
    double factor_max = 10.0;  // growth clamp, upper bound
    double kp = 0.4 / 3.0;
    double ki = 0.3 / 3.0;
    double h_init = 1e-2;
    double h_min = 1e-10;
    double h_max = 1.0;

    static ControllerConfig for_embedded_order(int k_emb);

    void validate() const;  // throws ConfigError

    nlohmann::json to_json() const;
    static ControllerConfig from_json(const nlohmann::json& j);
};

// Mixed absolute/relative RMS norm of the local error estimate; accept when
// the result is <= 1.
double error_norm(std::span<const double> estimate, std::span<const double> y_prev,
                  std::span<const double> y_next, const ControllerConfig& cfg);

struct Proposal {
    bool accept = false;
    double h_next = 0.0;
};

// PI step proposal. err is floored at 1e-10 before exponentiation. Throws
// StiffnessError when the proposed step falls below cfg.h_min.
Proposal propose(double err, double err_prev, double h, const ControllerConfig& cfg);

// Accepted step sizes plus everything the backward pass needs to retrace the
// identical grid. Rejected steps never enter the record. This is the one
// O(N) retention of an adaptive solve: scalars only, no state vectors.
struct StepRecord {
    std::vector<double> h;                   // accepted steps, in order
    std::vector<std::size_t> obs_indices;    // step indices (0..N) that are observations
    std::int64_t rejections = 0;
    double t0 = 0.0;
    double err_prev_final = 1.0;             // final controller state

    std::size_t n_steps() const { return h.size(); }
    double total_time() const;

    void write_csv(const std::string& path) const;
    nlohmann::json to_json() const;
};

}  // namespace revode
