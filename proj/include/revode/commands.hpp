#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace revode::cmd {

// Shared exit code convention: 0 success, 1 numerical failure, 2 usage or
// configuration error (the CLI maps ConfigError/DataError to 2).
struct CmdResult {
    int exit_code = 0;
    nlohmann::json summary;
};

// Global-error-vs-h sweep on dy/dt = alpha y for base and coupled solvers;
// writes convergence.csv plus fitted log-log slopes in slopes.json.
CmdResult convergence(const nlohmann::json& cfg, const std::string& out_dir);

// (h alpha, lambda) region scans; writes stability_grid.csv and
// stability_region.csv.
CmdResult stability(const nlohmann::json& cfg, const std::string& out_dir);

// Cross-checks the three gradient engines against each other and against
// central finite differences; writes gradcheck.json. Exit 1 when any
// deviation exceeds its tolerance.
CmdResult gradcheck(const nlohmann::json& cfg, const std::string& out_dir);

// Counter/wall-time matrix over (engine, solver, N, c); writes bench.jsonl.
CmdResult bench(const nlohmann::json& cfg, const std::string& out_dir);

// Full training run; writes train_log.jsonl, final.params.{bin,json} and
// predictions.csv.
CmdResult train(const nlohmann::json& cfg, const std::string& out_dir);

nlohmann::json load_config_file(const std::string& path);

}  // namespace revode::cmd
