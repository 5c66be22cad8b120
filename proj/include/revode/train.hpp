#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "revode/baseline.hpp"
#include "revode/optimizer.hpp"
#include "revode/trajectory.hpp"

namespace revode {

enum class EngineKind { Reversible, FullTape, Checkpointed };

EngineKind engine_from_name(std::string_view name);
std::string_view engine_name(EngineKind kind);

enum class LossKind { TrajectoryMse, TerminalMse };

struct DataConfig {
    std::string kind;  // white_dwarf | coupled_oscillator | csv
    double constant = 0.001;
    std::pair<double, double> t_range{0.0, 5.0};
    std::size_t n_points = 1001;
    bool normalize = false;
    std::string path;  // csv only
};

struct TrainConfig {
    std::string solver = "rk4";
    EngineKind engine = EngineKind::Reversible;
    std::size_t checkpoints = 8;
    double lambda = 0.99;
    std::optional<double> fixed_h;       // exactly one of fixed_h / controller set
    std::optional<ControllerConfig> controller;
    AdamWConfig optimizer;
    std::size_t train_steps = 1000;
    std::uint64_t seed = 0;
    std::size_t hidden_size = 10;
    LossKind loss = LossKind::TrajectoryMse;
    DataConfig data;

    static TrainConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;
};

Trajectory load_training_data(const DataConfig& cfg);

struct IterLog {
    std::size_t iter = 0;
    double loss = 0.0;
    double grad_norm = 0.0;
    double wall_ms = 0.0;
    std::int64_t stored_state_peak = 0;
    std::int64_t step_evals = 0;
    std::int64_t vjp_evals = 0;
    std::int64_t n_steps_solver = 0;
    bool skipped = false;

    nlohmann::json to_json() const;
};

struct TrainResult {
    Params final_params;
    std::vector<IterLog> log;
    std::size_t state_dim = 0;
    std::size_t hidden = 0;
};

// Fits the MLP vector field to `data`; per-iteration records go to `log_out`
// as JSON lines when given. A non-finite loss or a solver failure triggers
// the backoff policy (halve h / tighten tolerances once), then the iteration
// is skipped without an optimizer update.
TrainResult train(const TrainConfig& config, const Trajectory& data,
                  std::ostream* log_out = nullptr);

}  // namespace revode
