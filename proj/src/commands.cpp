#include "revode/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <thread>

#include "revode/baseline.hpp"
#include "revode/errors.hpp"
#include "revode/json_util.hpp"
#include "revode/loss.hpp"
#include "revode/rng.hpp"
#include "revode/stability.hpp"
#include "revode/stats.hpp"
#include "revode/synthetic.hpp"
#include "revode/train.hpp"

#ifndef REVODE_BUILD_ID
#define REVODE_BUILD_ID "unknown"
#endif

namespace revode::cmd {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Written before computation starts, finalized atomically on success.
class Manifest {
  public:
    Manifest(std::string out_dir, std::string subcommand, json resolved_config)
        : out_dir_(std::move(out_dir)) {
        fs::create_directories(out_dir_);
        doc_["subcommand"] = std::move(subcommand);
        doc_["config"] = std::move(resolved_config);
        doc_["seed"] = doc_["config"].value("seed", 0);
        doc_["build"] = REVODE_BUILD_ID;
        doc_["outputs"] = json::array();
        doc_["started_at"] = iso_now();
        doc_["status"] = "running";
        write(path());
    }

    std::string out_path(const std::string& name) {
        doc_["outputs"].push_back(name);
        return out_dir_ + "/" + name;
    }

    void finish() {
        doc_["finished_at"] = iso_now();
        doc_["status"] = "complete";
        const std::string tmp = path() + ".tmp";
        write(tmp);
        fs::rename(tmp, path());
    }

  private:
    std::string path() const { return out_dir_ + "/manifest.json"; }

    void write(const std::string& p) const {
        std::ofstream out(p);
        if (!out) throw DataError("cannot write " + p);
        out << doc_.dump(2) << "\n";
    }

    std::string out_dir_;
    json doc_;
};

std::size_t worker_count() {
    if (const char* env = std::getenv("REVODE_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<std::size_t>(n);
    }
    return 1;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(worker_count(), std::max<std::size_t>(n, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// convergence

CmdResult convergence(const json& cfg, const std::string& out_dir) {
    check_keys(cfg, {"solvers", "h_list", "t_final", "alpha", "lambda", "y0", "seed"},
               "convergence config");
    const auto solvers = json_get<std::vector<std::string>>(
        cfg, "solvers", {"euler", "midpoint", "ralston3", "rk4"});
    const auto h_list = json_require<std::vector<double>>(cfg, "h_list", "convergence config");
    if (h_list.empty()) throw ConfigError("convergence: h_list must not be empty");
    const double t_final = json_get<double>(cfg, "t_final", 1.0);
    const double alpha = json_get<double>(cfg, "alpha", -1.0);
    const double lambda = json_get<double>(cfg, "lambda", 0.999);
    const double y0 = json_get<double>(cfg, "y0", 1.0);

    Manifest manifest(out_dir, "convergence", cfg);
    const std::string csv_path = manifest.out_path("convergence.csv");
    const std::string slopes_path = manifest.out_path("slopes.json");

    LinearField field(1, alpha);
    const double exact = y0 * std::exp(alpha * t_final);
    const Coupling coupling(lambda);

    std::ofstream csv(csv_path);
    if (!csv) throw DataError("cannot write " + csv_path);
    csv << "solver,variant,h,error\n";

    json slopes;
    for (const auto& name : solvers) {
        const ButcherTableau tab = make_tableau(name);
        std::vector<double> errs_base, errs_rev;
        for (double h : h_list) {
            const auto n = static_cast<std::size_t>(std::llround(t_final / h));
            if (n == 0 || std::abs(n * h - t_final) > 1e-9) {
                throw ConfigError("convergence: h=" + fmt(h) + " does not divide t_final");
            }
            const auto base = plain_solve_fixed(field, tab, {y0}, 0.0, n, h);
            const double err_base = std::abs(base.y[0] - exact);
            const auto rev = solve_forward(field, tab, {y0}, 0.0, t_final,
                                           FixedSchedule{n, h}, coupling);
            const double err_rev = std::abs(rev.terminal.y[0] - exact);
            errs_base.push_back(err_base);
            errs_rev.push_back(err_rev);
            csv << name << ",base," << fmt(h) << "," << fmt(err_base) << "\n";
            csv << name << ",reversible," << fmt(h) << "," << fmt(err_rev) << "\n";
        }
        slopes[name] = {{"base", fit_loglog_slope(h_list, errs_base)},
                        {"reversible", fit_loglog_slope(h_list, errs_rev)},
                        {"order", tab.order}};
    }

    std::ofstream sj(slopes_path);
    sj << slopes.dump(2) << "\n";
    manifest.finish();
    return {0, slopes};
}

// ---------------------------------------------------------------------------
// stability

CmdResult stability(const json& cfg, const std::string& out_dir) {
    check_keys(cfg, {"tableaus", "lambdas", "h_alpha", "empirical", "seed"}, "stability config");
    const auto tabs = json_get<std::vector<std::string>>(cfg, "tableaus", tableau_names());
    const auto lambdas =
        json_get<std::vector<double>>(cfg, "lambdas", {0.5, 0.9, 0.99, 0.999});
    double ha_min = -3.0, ha_max = 0.0;
    std::size_t ha_n = 100;
    if (cfg.contains("h_alpha")) {
        const auto& g = cfg.at("h_alpha");
        check_keys(g, {"min", "max", "n"}, "stability h_alpha");
        ha_min = json_get<double>(g, "min", ha_min);
        ha_max = json_get<double>(g, "max", ha_max);
        ha_n = json_get<std::size_t>(g, "n", ha_n);
    }
    if (!(ha_max > ha_min) || ha_n < 2) throw ConfigError("stability: bad h_alpha grid");
    const bool empirical = json_get<bool>(cfg, "empirical", false);

    std::vector<double> grid(ha_n);
    for (std::size_t i = 0; i < ha_n; ++i) {
        grid[i] = ha_min + (ha_max - ha_min) * static_cast<double>(i) / static_cast<double>(ha_n);
    }

    Manifest manifest(out_dir, "stability", cfg);
    const std::string grid_path = manifest.out_path("stability_grid.csv");
    const std::string region_path = manifest.out_path("stability_region.csv");

    struct Row {
        std::string text;
    };
    std::vector<std::vector<Row>> cells(tabs.size() * lambdas.size());

    parallel_for(cells.size(), [&](std::size_t idx) {
        const auto& tab_name = tabs[idx / lambdas.size()];
        const double lambda = lambdas[idx % lambdas.size()];
        const ButcherTableau tab = make_tableau(tab_name);
        auto& out = cells[idx];
        out.reserve(grid.size());
        for (double ha : grid) {
            const auto v = is_stable(tab, ha, lambda);
            std::string line = tab_name + "," + fmt(lambda) + "," + fmt(ha) + "," + fmt(v.gamma) +
                               "," + fmt(v.spectral_radius) + "," + (v.criterion ? "1" : "0") +
                               "," + (v.marginal_lambda ? "1" : "0");
            if (empirical) {
                const auto dec = empirical_decay(tab, ha, lambda);
                line += dec == DecayVerdict::Decays       ? ",decays"
                        : dec == DecayVerdict::Diverges   ? ",diverges"
                                                          : ",inconclusive";
            }
            out.push_back({std::move(line)});
        }
    });

    std::ofstream gridcsv(grid_path);
    gridcsv << "tableau,lambda,h_alpha,gamma,rho,stable,marginal";
    if (empirical) gridcsv << ",empirical";
    gridcsv << "\n";
    for (const auto& cell : cells) {
        for (const auto& row : cell) gridcsv << row.text << "\n";
    }

    std::ofstream regioncsv(region_path);
    regioncsv << "tableau,lambda,boundary_h_alpha,any_stable,marginal\n";
    for (const auto& tab_name : tabs) {
        const ButcherTableau tab = make_tableau(tab_name);
        for (const auto& row : region_scan(tab, lambdas, grid)) {
            regioncsv << tab_name << "," << fmt(row.lambda) << "," << fmt(row.boundary_h_alpha)
                      << "," << (row.any_stable ? "1" : "0") << "," << (row.marginal ? "1" : "0")
                      << "\n";
        }
    }
    manifest.finish();
    return {0, {{"grid_rows", tabs.size() * lambdas.size() * grid.size()}}};
}

// ---------------------------------------------------------------------------
// gradcheck

namespace {

// Loss against the zero target: L = mean_i |y_i|^2 over observations.
struct ZeroTargetMse {
    std::size_t n_obs;
    std::size_t d;
    double acc = 0.0;

    double scale() const { return 1.0 / static_cast<double>(n_obs * d); }
    void add(std::span<const double> y) {
        for (double v : y) acc += v * v;
    }
    double loss() const { return acc * scale(); }
    void grad(std::span<const double> y, std::span<double> g) const {
        for (std::size_t c = 0; c < d; ++c) g[c] = 2.0 * scale() * y[c];
    }
};

double forward_loss_only(const VectorField& field, const ButcherTableau& tab, const Vec& y0,
                         double duration, const Schedule& schedule, Coupling coupling,
                         const std::vector<double>& obs_times, std::size_t d) {
    ZeroTargetMse mse{obs_times.size(), d};
    solve_forward(field, tab, y0, 0.0, duration, schedule, coupling, obs_times,
                  [&](std::size_t, std::size_t, double, std::span<const double> y) { mse.add(y); });
    return mse.loss();
}

}  // namespace

CmdResult gradcheck(const json& cfg, const std::string& out_dir) {
    check_keys(cfg,
               {"solver", "n_steps", "h", "d", "hidden", "lambda", "seeds", "obs_count",
                "checkpoints", "fd_step", "corrupt_lambda", "seed"},
               "gradcheck config");
    const std::string solver = json_get<std::string>(cfg, "solver", "rk4");
    const std::size_t n_steps = json_get<std::size_t>(cfg, "n_steps", 100);
    if (n_steps > 200) throw ConfigError("gradcheck: n_steps capped at 200 so the tape stays small");
    const double h = json_get<double>(cfg, "h", 0.01);
    const std::size_t d = json_get<std::size_t>(cfg, "d", 2);
    const std::size_t hidden = json_get<std::size_t>(cfg, "hidden", 10);
    const double lambda = json_get<double>(cfg, "lambda", 0.99);
    const std::size_t n_seeds = json_get<std::size_t>(cfg, "seeds", 20);
    const std::size_t obs_count = json_get<std::size_t>(cfg, "obs_count", 10);
    const std::size_t checkpoints = json_get<std::size_t>(cfg, "checkpoints", 8);
    const double fd_step = json_get<double>(cfg, "fd_step", 1e-6);
    const bool corrupt_lambda = json_get<bool>(cfg, "corrupt_lambda", false);
    const std::uint64_t seed0 = json_get<std::uint64_t>(cfg, "seed", 0);

    Manifest manifest(out_dir, "gradcheck", cfg);
    const std::string report_path = manifest.out_path("gradcheck.json");

    const ButcherTableau tab = make_tableau(solver);
    const Coupling coupling(lambda);
    const double duration = n_steps * h;
    const Schedule schedule = FixedSchedule{n_steps, h};

    std::vector<double> obs_times;
    for (std::size_t k = 1; k <= obs_count; ++k) {
        const std::size_t idx = k * n_steps / obs_count;
        obs_times.push_back(idx * h);
    }

    double worst_rev_tape = 0.0, worst_tape_fd = 0.0, worst_chk_tape = 0.0;

    for (std::size_t s = 0; s < n_seeds; ++s) {
        const std::uint64_t seed = seed0 + s;
        MlpField field(d, hidden, MlpField::random_params(d, hidden, seed));
        Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
        Vec y0(d);
        for (double& v : y0) v = rng.uniform(-1.0, 1.0);

        ZeroTargetMse mse{obs_times.size(), d};
        GradientRequest request;
        request.obs_times = obs_times;
        request.observer = [&](std::size_t, std::size_t, double, std::span<const double> y) {
            mse.add(y);
        };
        request.grad = [&](std::size_t, std::size_t, double, std::span<const double> y,
                           std::span<double> g) { mse.grad(y, g); };

        const auto tape =
            full_tape_backprop(field, tab, y0, 0.0, duration, schedule, coupling, request);
        BackpropOptions opts;
        if (corrupt_lambda) opts.lambda_backward_override = lambda * (1.0 + 1e-3);
        const auto rev = reversible_engine_backprop(field, tab, y0, 0.0, duration, schedule,
                                                    coupling, request, opts);
        const auto chk = checkpointed_backprop(field, tab, y0, 0.0, duration, schedule, coupling,
                                               request, checkpoints);

        worst_rev_tape = std::max(worst_rev_tape, vec::rel_linf(rev.theta_bar, tape.theta_bar));
        worst_chk_tape = std::max(worst_chk_tape, vec::rel_linf(chk.theta_bar, tape.theta_bar));

        // Central finite differences of the forward loss.
        Vec fd(field.param_count());
        Params base = field.params();
        for (std::size_t i = 0; i < fd.size(); ++i) {
            Params p = base;
            p[i] = base[i] + fd_step;
            field.set_params(p);
            const double lp =
                forward_loss_only(field, tab, y0, duration, schedule, coupling, obs_times, d);
            p[i] = base[i] - fd_step;
            field.set_params(p);
            const double lm =
                forward_loss_only(field, tab, y0, duration, schedule, coupling, obs_times, d);
            fd[i] = (lp - lm) / (2.0 * fd_step);
        }
        field.set_params(base);
        worst_tape_fd = std::max(worst_tape_fd, vec::rel_linf(tape.theta_bar, fd));
    }

    const double tol_rev_tape = 1e-8, tol_tape_fd = 1e-4, tol_chk_tape = 1e-12;
    const bool pass = worst_rev_tape <= tol_rev_tape && worst_tape_fd <= tol_tape_fd &&
                      worst_chk_tape <= tol_chk_tape;

    json report = {
        {"reversible_vs_tape", {{"max_rel_linf", worst_rev_tape}, {"tol", tol_rev_tape}, {"pass", worst_rev_tape <= tol_rev_tape}}},
        {"tape_vs_fd", {{"max_rel_linf", worst_tape_fd}, {"tol", tol_tape_fd}, {"pass", worst_tape_fd <= tol_tape_fd}}},
        {"checkpointed_vs_tape", {{"max_rel_linf", worst_chk_tape}, {"tol", tol_chk_tape}, {"pass", worst_chk_tape <= tol_chk_tape}}},
        {"pass", pass},
        {"seeds", n_seeds},
        {"corrupt_lambda", corrupt_lambda}};

    std::ofstream rj(report_path);
    rj << report.dump(2) << "\n";
    manifest.finish();
    return {pass ? 0 : 1, report};
}

// ---------------------------------------------------------------------------
// bench

CmdResult bench(const json& cfg, const std::string& out_dir) {
    check_keys(cfg, {"engines", "solvers", "n_list", "checkpoints", "lambda", "t_final", "d", "seed"},
               "bench config");
    const auto engines = json_get<std::vector<std::string>>(
        cfg, "engines", {"reversible", "full_tape", "checkpointed"});
    const auto solvers = json_get<std::vector<std::string>>(cfg, "solvers", {"rk4"});
    const auto n_list = json_get<std::vector<std::size_t>>(cfg, "n_list", {100, 1000});
    const auto c_list = json_get<std::vector<std::size_t>>(cfg, "checkpoints", {2, 8});
    const double lambda = json_get<double>(cfg, "lambda", 0.99);
    const double t_final = json_get<double>(cfg, "t_final", 1.0);

    Manifest manifest(out_dir, "bench", cfg);
    const std::string out_path = manifest.out_path("bench.jsonl");
    std::ofstream out(out_path);
    if (!out) throw DataError("cannot write " + out_path);

    LinearField field(1, -1.0);
    const Coupling coupling(lambda);

    for (const auto& solver : solvers) {
        const ButcherTableau tab = make_tableau(solver);
        for (std::size_t n : n_list) {
            const double h = t_final / static_cast<double>(n);
            const Schedule schedule = FixedSchedule{n, h};
            const std::vector<double> obs = {t_final};

            for (const auto& engine : engines) {
                const std::vector<std::size_t> cs =
                    (engine == "checkpointed") ? c_list : std::vector<std::size_t>{0};
                for (std::size_t c : cs) {
                    GradientRequest request;
                    request.obs_times = obs;
                    request.grad = [](std::size_t, std::size_t, double, std::span<const double> y,
                                      std::span<double> g) {
                        for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * y[i];
                    };

                    const auto tic = std::chrono::steady_clock::now();
                    BaselineResult r;
                    if (engine == "reversible") {
                        r = reversible_engine_backprop(field, tab, {1.0}, 0.0, t_final, schedule,
                                                       coupling, request);
                    } else if (engine == "full_tape") {
                        r = full_tape_backprop(field, tab, {1.0}, 0.0, t_final, schedule, coupling,
                                               request);
                    } else if (engine == "checkpointed") {
                        r = checkpointed_backprop(field, tab, {1.0}, 0.0, t_final, schedule,
                                                  coupling, request, c);
                    } else {
                        throw ConfigError("bench: unknown engine '" + engine + "'");
                    }
                    const double wall_ms =
                        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                  tic)
                            .count();

                    json line = {{"engine", engine},
                                 {"solver", solver},
                                 {"n_steps", n},
                                 {"checkpoints", c},
                                 {"wall_ms", wall_ms},
                                 {"stored_state_peak", r.counters.stored_state_peak},
                                 {"checkpoint_slots_peak", r.counters.checkpoint_slots_peak},
                                 {"step_evals_forward", r.counters.steps_forward},
                                 {"step_evals_backward", r.counters.steps_backward},
                                 {"psi_evals", r.counters.psi_evals},
                                 {"vjp_evals", r.counters.vjp_evals}};
                    out << line.dump() << "\n";
                }
            }
        }
    }
    manifest.finish();
    return {0, {}};
}

// ---------------------------------------------------------------------------
// train

CmdResult train(const json& cfg, const std::string& out_dir) {
    TrainConfig tc = TrainConfig::from_json(cfg);
    Manifest manifest(out_dir, "train", tc.to_json());

    const Trajectory data = load_training_data(tc.data);

    const std::string log_path = manifest.out_path("train_log.jsonl");
    const std::string params_prefix = out_dir + "/final";
    manifest.out_path("final.params.bin");
    manifest.out_path("final.params.json");
    const std::string pred_path = manifest.out_path("predictions.csv");

    std::ofstream log(log_path);
    if (!log) throw DataError("cannot write " + log_path);

    const TrainResult result = revode::train(tc, data, &log);
    result.final_params.save(params_prefix);

    // Solution snapshot at the data times under the final parameters.
    {
        MlpField field(result.state_dim, result.hidden, result.final_params);
        const ButcherTableau tab = make_tableau(tc.solver);
        Trajectory pred;
        pred.dim = data.dim;
        pred.times = data.times;
        pred.values.assign(data.values.size(), 0.0);
        Schedule schedule;
        const double duration = data.times.back() - data.times.front();
        if (tc.fixed_h) {
            schedule = FixedSchedule{static_cast<std::size_t>(std::llround(duration / *tc.fixed_h)),
                                     *tc.fixed_h};
        } else {
            schedule = AdaptiveSchedule{*tc.controller};
        }
        std::vector<double> obs(data.times.begin(), data.times.end());
        Vec y0(data.row(0).begin(), data.row(0).end());
        solve_forward(field, tab, y0, data.times.front(), duration, schedule, Coupling(tc.lambda),
                      obs,
                      [&](std::size_t ordinal, std::size_t, double, std::span<const double> y) {
                          std::copy(y.begin(), y.end(), pred.row(ordinal).begin());
                      });
        pred.write_csv(pred_path);
    }

    double final_loss = std::nan("");
    for (auto it = result.log.rbegin(); it != result.log.rend(); ++it) {
        if (!it->skipped) {
            final_loss = it->loss;
            break;
        }
    }
    json summary = {{"iterations", result.log.size()}, {"final_loss", final_loss}};
    manifest.finish();
    return {0, summary};
}

}  // namespace revode::cmd
