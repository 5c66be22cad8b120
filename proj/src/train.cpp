#include "revode/train.hpp"

#include <chrono>
#include <cmath>

#include "revode/errors.hpp"
#include "revode/json_util.hpp"
#include "revode/loss.hpp"
#include "revode/synthetic.hpp"

namespace revode {

using nlohmann::json;

EngineKind engine_from_name(std::string_view name) {
    if (name == "reversible") return EngineKind::Reversible;
    if (name == "full_tape") return EngineKind::FullTape;
    if (name == "checkpointed") return EngineKind::Checkpointed;
    throw ConfigError("unknown engine '" + std::string(name) +
                      "' (expected reversible|full_tape|checkpointed)");
}

std::string_view engine_name(EngineKind kind) {
    switch (kind) {
        case EngineKind::Reversible: return "reversible";
        case EngineKind::FullTape: return "full_tape";
        case EngineKind::Checkpointed: return "checkpointed";
    }
    return "?";
}

TrainConfig TrainConfig::from_json(const json& j) {
    check_keys(j,
               {"solver", "engine", "checkpoints", "lambda", "step", "optimizer", "train_steps",
                "seed", "hidden_size", "loss", "data"},
               "train config");
    TrainConfig cfg;
    cfg.solver = json_get<std::string>(j, "solver", cfg.solver);
    cfg.engine = engine_from_name(json_get<std::string>(j, "engine", "reversible"));
    cfg.checkpoints = json_get<std::size_t>(j, "checkpoints", cfg.checkpoints);
    cfg.lambda = json_get<double>(j, "lambda", cfg.lambda);
    cfg.train_steps = json_get<std::size_t>(j, "train_steps", cfg.train_steps);
    cfg.seed = json_get<std::uint64_t>(j, "seed", cfg.seed);
    cfg.hidden_size = json_get<std::size_t>(j, "hidden_size", cfg.hidden_size);

    const std::string loss = json_get<std::string>(j, "loss", "trajectory_mse");
    if (loss == "trajectory_mse") cfg.loss = LossKind::TrajectoryMse;
    else if (loss == "terminal_mse") cfg.loss = LossKind::TerminalMse;
    else throw ConfigError("unknown loss '" + loss + "'");

    if (j.contains("step")) {
        const auto& st = j.at("step");
        check_keys(st, {"fixed_h", "adaptive"}, "train config step");
        if (st.contains("fixed_h") == st.contains("adaptive")) {
            throw ConfigError("step: give exactly one of 'fixed_h' or 'adaptive'");
        }
        if (st.contains("fixed_h")) cfg.fixed_h = st.at("fixed_h").get<double>();
        else cfg.controller = ControllerConfig::from_json(st.at("adaptive"));
    }

    if (j.contains("optimizer")) {
        const auto& opt = j.at("optimizer");
        check_keys(opt, {"lr", "weight_decay", "beta1", "beta2", "eps"}, "optimizer config");
        cfg.optimizer.lr = json_get<double>(opt, "lr", cfg.optimizer.lr);
        cfg.optimizer.weight_decay = json_get<double>(opt, "weight_decay", cfg.optimizer.weight_decay);
        cfg.optimizer.beta1 = json_get<double>(opt, "beta1", cfg.optimizer.beta1);
        cfg.optimizer.beta2 = json_get<double>(opt, "beta2", cfg.optimizer.beta2);
        cfg.optimizer.eps = json_get<double>(opt, "eps", cfg.optimizer.eps);
    }

    const auto& data = j.at("data");
    check_keys(data, {"kind", "constant", "t_range", "n_points", "normalize", "path"},
               "data config");
    cfg.data.kind = json_require<std::string>(data, "kind", "data config");
    cfg.data.constant = json_get<double>(data, "constant", cfg.data.constant);
    if (data.contains("t_range")) {
        auto r = data.at("t_range").get<std::vector<double>>();
        if (r.size() != 2) throw ConfigError("data.t_range must have two entries");
        cfg.data.t_range = {r[0], r[1]};
    }
    cfg.data.n_points = json_get<std::size_t>(data, "n_points", cfg.data.n_points);
    cfg.data.normalize = json_get<bool>(data, "normalize", cfg.data.normalize);
    cfg.data.path = json_get<std::string>(data, "path", cfg.data.path);

    cfg.validate();
    return cfg;
}

json TrainConfig::to_json() const {
    json step;
    if (fixed_h) step["fixed_h"] = *fixed_h;
    if (controller) step["adaptive"] = controller->to_json();
    json data = {{"kind", this->data.kind},
                 {"constant", this->data.constant},
                 {"t_range", {this->data.t_range.first, this->data.t_range.second}},
                 {"n_points", this->data.n_points},
                 {"normalize", this->data.normalize}};
    if (!this->data.path.empty()) data["path"] = this->data.path;
    return {{"solver", solver},
            {"engine", std::string(engine_name(engine))},
            {"checkpoints", checkpoints},
            {"lambda", lambda},
            {"step", step},
            {"optimizer",
             {{"lr", optimizer.lr},
              {"weight_decay", optimizer.weight_decay},
              {"beta1", optimizer.beta1},
              {"beta2", optimizer.beta2},
              {"eps", optimizer.eps}}},
            {"train_steps", train_steps},
            {"seed", seed},
            {"hidden_size", hidden_size},
            {"loss", loss == LossKind::TrajectoryMse ? "trajectory_mse" : "terminal_mse"},
            {"data", data}};
}

void TrainConfig::validate() const {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in (0, 1]");
    if (!(optimizer.lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (!fixed_h && !controller) throw ConfigError("step: give 'fixed_h' or 'adaptive'");
    if (fixed_h && !(*fixed_h > 0.0)) throw ConfigError("fixed_h must be positive");
    if (engine == EngineKind::Checkpointed && checkpoints < 2) {
        throw ConfigError("checkpointed engine needs a budget of at least 2");
    }
    make_tableau(solver);  // throws on unknown names
    if (data.kind != "white_dwarf" && data.kind != "coupled_oscillator" && data.kind != "csv") {
        throw ConfigError("data.kind must be white_dwarf|coupled_oscillator|csv");
    }
    if (data.kind == "csv" && data.path.empty()) throw ConfigError("data.kind csv needs 'path'");
}

Trajectory load_training_data(const DataConfig& cfg) {
    if (cfg.kind == "white_dwarf") {
        return generate_white_dwarf(cfg.constant, cfg.t_range, cfg.n_points);
    }
    if (cfg.kind == "coupled_oscillator") {
        Trajectory raw = generate_coupled_oscillator(cfg.t_range, std::max<std::size_t>(cfg.n_points, 2));
        return resample(raw, cfg.t_range, cfg.n_points, cfg.normalize).traj;
    }
    return ingest_csv(cfg.path, cfg.t_range, cfg.n_points, cfg.normalize).traj;
}

json IterLog::to_json() const {
    return {{"iter", iter},
            {"loss", loss},
            {"grad_norm", grad_norm},
            {"wall_ms", wall_ms},
            {"stored_state_peak", stored_state_peak},
            {"step_evals", step_evals},
            {"vjp_evals", vjp_evals},
            {"n_steps_solver", n_steps_solver},
            {"skipped", skipped}};
}

namespace {

struct SolveSetup {
    Schedule schedule;
    double duration = 0.0;
};

SolveSetup make_schedule(const TrainConfig& cfg, const Trajectory& data) {
    SolveSetup s;
    s.duration = data.times.back() - data.times.front();
    if (cfg.fixed_h) {
        const double h = *cfg.fixed_h;
        const auto n = static_cast<std::size_t>(std::llround(s.duration / h));
        if (n == 0 || std::abs(n * h - s.duration) > 1e-9 * std::max(1.0, s.duration)) {
            throw ConfigError("fixed_h does not divide the data time span");
        }
        s.schedule = FixedSchedule{n, h};
    } else {
        s.schedule = AdaptiveSchedule{*cfg.controller};
    }
    return s;
}

}  // namespace

TrainResult train(const TrainConfig& config, const Trajectory& data, std::ostream* log_out) {
    config.validate();
    data.validate();

    const ButcherTableau tab = make_tableau(config.solver);
    const Coupling coupling(config.lambda);
    const std::size_t d = data.dim;

    MlpField field(d, config.hidden_size,
                   MlpField::random_params(d, config.hidden_size, config.seed));
    AdamW opt(field.param_count(), config.optimizer);

    const std::size_t first_obs_row = (config.loss == LossKind::TerminalMse) ? data.size() - 1 : 1;
    TrajectoryMse mse(data, first_obs_row);

    Vec y0(data.row(0).begin(), data.row(0).end());
    const double t0 = data.times.front();

    TrainConfig run_cfg = config;  // mutable copy: divergence backoff edits the schedule
    bool backoff_used = false;

    TrainResult result;
    result.state_dim = d;
    result.hidden = config.hidden_size;
    result.log.reserve(config.train_steps);

    for (std::size_t iter = 0; iter < config.train_steps; ++iter) {
        const auto setup = make_schedule(run_cfg, data);
        IterLog entry;
        entry.iter = iter;
        const auto tic = std::chrono::steady_clock::now();

        mse.reset();
        GradientRequest request;
        request.obs_times = mse.obs_times();
        request.observer = [&](std::size_t ordinal, std::size_t, double, std::span<const double> y) {
            mse.accumulate(ordinal, y);
        };
        request.grad = [&](std::size_t ordinal, std::size_t, double, std::span<const double> y,
                           std::span<double> grad_out) { mse.gradient(ordinal, y, grad_out); };

        bool failed = false;
        std::string why;
        BaselineResult grads;
        try {
            switch (config.engine) {
                case EngineKind::Reversible:
                    grads = reversible_engine_backprop(field, tab, y0, t0, setup.duration,
                                                       setup.schedule, coupling, request);
                    break;
                case EngineKind::FullTape:
                    grads = full_tape_backprop(field, tab, y0, t0, setup.duration, setup.schedule,
                                               coupling, request);
                    break;
                case EngineKind::Checkpointed:
                    grads = checkpointed_backprop(field, tab, y0, t0, setup.duration,
                                                  setup.schedule, coupling, request,
                                                  config.checkpoints);
                    break;
            }
            entry.loss = mse.loss();
            entry.grad_norm = vec::norm2(grads.theta_bar);
            if (!std::isfinite(entry.loss) || !vec::all_finite(grads.theta_bar)) {
                failed = true;
                why = "non-finite loss or gradient";
            }
        } catch (const DivergenceError& e) {
            failed = true;
            why = e.what();
        } catch (const StiffnessError& e) {
            failed = true;
            why = e.what();
        } catch (const ReversibilityError& e) {
            failed = true;
            why = e.what();
        }

        if (failed) {
            entry.skipped = true;
            entry.loss = std::nan("");
            entry.grad_norm = 0.0;
            if (!backoff_used) {
                backoff_used = true;
                if (run_cfg.fixed_h) {
                    run_cfg.fixed_h = *run_cfg.fixed_h / 2.0;
                } else {
                    run_cfg.controller->atol *= 0.5;
                    run_cfg.controller->rtol *= 0.5;
                }
            }
            (void)why;
        } else {
            entry.stored_state_peak = grads.counters.stored_state_peak;
            entry.step_evals = grads.counters.psi_evals;
            entry.vjp_evals = grads.counters.vjp_evals;
            entry.n_steps_solver = static_cast<std::int64_t>(grads.record.n_steps());
            Params p = field.params();
            opt.update(p.values(), grads.theta_bar);
            field.set_params(std::move(p));
        }

        entry.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - tic)
                            .count();
        if (log_out) (*log_out) << entry.to_json().dump() << "\n";
        result.log.push_back(entry);
    }

    result.final_params = field.params();
    return result;
}

}  // namespace revode
