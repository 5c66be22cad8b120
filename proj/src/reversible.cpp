#include "revode/reversible.hpp"

#include <algorithm>
#include <cmath>

#include "revode/errors.hpp"

namespace revode {

Coupling::Coupling(double l) : lambda(l) {
    if (!(l > 0.0) || !(l <= 1.0)) {
        throw ConfigError("coupling parameter must lie in (0, 1], got " + std::to_string(l));
    }
}

ReversibleState ReversibleState::initial(Vec y0, double t0) {
    ReversibleState s;
    s.t = t0;
    s.z = y0;
    s.y = std::move(y0);
    s.n = 0;
    return s;
}

void forward_step(ReversibleState& s, const VectorField& field, const ButcherTableau& tab,
                  double h, Coupling coupling, EngineScratch& ws, SolveCounters* counters,
                  std::span<double> err_out) {
    const std::size_t d = s.dim();
    const double lambda = coupling.lambda;

    rk_step(field, tab, s.t, s.z, h, ws.psi, err_out, ws.rk);
    for (std::size_t m = 0; m < d; ++m) {
        s.y[m] = lambda * s.y[m] + (1.0 - lambda) * s.z[m] + ws.psi[m];
    }
    s.t += h;

    rk_step(field, tab, s.t, s.y, -h, ws.psi, {}, ws.rk);
    for (std::size_t m = 0; m < d; ++m) s.z[m] -= ws.psi[m];
    s.n += 1;

    if (counters) counters->psi_evals += 2;
}

void backward_step(ReversibleState& s, const VectorField& field, const ButcherTableau& tab,
                   double h, Coupling coupling, EngineScratch& ws, SolveCounters* counters) {
    const std::size_t d = s.dim();
    const double inv_lambda = 1.0 / coupling.lambda;

    rk_step(field, tab, s.t, s.y, -h, ws.psi, {}, ws.rk);
    for (std::size_t m = 0; m < d; ++m) s.z[m] += ws.psi[m];
    s.t -= h;

    rk_step(field, tab, s.t, s.z, h, ws.psi, {}, ws.rk);
    for (std::size_t m = 0; m < d; ++m) {
        s.y[m] = inv_lambda * s.y[m] + (1.0 - inv_lambda) * s.z[m] - inv_lambda * ws.psi[m];
    }
    s.n -= 1;

    if (counters) counters->psi_evals += 2;
}

namespace {

// Maps each observation time onto a fixed grid index; throws if off-grid.
std::vector<std::size_t> obs_to_grid(const std::vector<double>& obs_times, double t0, double h,
                                     std::size_t n_steps) {
    std::vector<std::size_t> idx;
    idx.reserve(obs_times.size());
    for (double ot : obs_times) {
        const double pos = (ot - t0) / h;
        const auto i = static_cast<long long>(std::llround(pos));
        if (i < 0 || i > static_cast<long long>(n_steps) ||
            std::abs(pos - static_cast<double>(i)) > 1e-9 * std::max(1.0, std::abs(pos))) {
            throw ConfigError("observation time " + std::to_string(ot) +
                              " does not lie on the fixed step grid");
        }
        if (!idx.empty() && static_cast<std::size_t>(i) <= idx.back()) {
            throw ConfigError("observation times must be strictly increasing");
        }
        idx.push_back(static_cast<std::size_t>(i));
    }
    return idx;
}

}  // namespace

ForwardSolveResult solve_forward(const VectorField& field, const ButcherTableau& tab, const Vec& y0,
                                 double t0, double duration, const Schedule& schedule,
                                 Coupling coupling, const std::vector<double>& obs_times,
                                 const Observer& observer, const StateCallback& on_state) {
    ForwardSolveResult res;
    res.terminal = ReversibleState::initial(y0, t0);
    res.record.t0 = t0;
    res.counters.stored_state_peak = 2;  // the live (y, z) pair is all we keep

    EngineScratch ws;
    ws.resize(tab.stages, y0.size());

    auto emit = [&](std::size_t ordinal, std::size_t step_index) {
        if (observer) observer(ordinal, step_index, res.terminal.t, res.terminal.y);
    };
    if (on_state) on_state(res.terminal);

    if (const auto* fixed = std::get_if<FixedSchedule>(&schedule)) {
        const std::size_t n_steps = fixed->n_steps;
        const double h = fixed->h;
        if (!(h > 0.0) || n_steps == 0) throw ConfigError("fixed schedule needs h > 0 and n_steps > 0");
        if (std::abs(n_steps * h - duration) > 1e-9 * std::max(1.0, std::abs(duration))) {
            throw ConfigError("fixed schedule: duration must equal n_steps * h");
        }
        res.record.obs_indices = obs_to_grid(obs_times, t0, h, n_steps);
        res.record.h.assign(n_steps, h);

        std::size_t next_obs = 0;
        if (next_obs < res.record.obs_indices.size() && res.record.obs_indices[next_obs] == 0) {
            emit(next_obs, 0);
            ++next_obs;
        }
        for (std::size_t n = 0; n < n_steps; ++n) {
            try {
                forward_step(res.terminal, field, tab, h, coupling, ws, &res.counters);
            } catch (const DivergenceError& e) {
                throw DivergenceError(std::string(e.what()) + " at solver step " + std::to_string(n),
                                      n, e.stage_index, e.time);
            }
            ++res.counters.steps_forward;
            ++res.counters.accepted_steps;
            if (on_state) on_state(res.terminal);
            if (next_obs < res.record.obs_indices.size() &&
                res.record.obs_indices[next_obs] == n + 1) {
                emit(next_obs, n + 1);
                ++next_obs;
            }
        }
        return res;
    }

    const auto& cfg = std::get<AdaptiveSchedule>(schedule).cfg;
    cfg.validate();
    if (!tab.has_embedded()) {
        throw ConfigError("adaptive schedule requires a tableau with embedded error weights ('" +
                          tab.name + "' has none)");
    }
    const double t_end = t0 + duration;
    for (double ot : obs_times) {
        if (ot < t0 - 1e-12 || ot > t_end + 1e-12) {
            throw ConfigError("observation time outside the integration interval");
        }
    }

    std::size_t next_obs = 0;
    if (next_obs < obs_times.size() && std::abs(obs_times[next_obs] - t0) <= 1e-12) {
        res.record.obs_indices.push_back(0);
        emit(next_obs, 0);
        ++next_obs;
    }

    double h_prop = cfg.h_init;
    double err_prev = 1.0;
    ReversibleState trial;
    while (res.terminal.t < t_end - 1e-12 * std::max(1.0, std::abs(t_end))) {
        double h = std::min(h_prop, cfg.h_max);
        bool clamped = false;
        if (res.terminal.t + h >= t_end) {
            h = t_end - res.terminal.t;
            clamped = true;
        }
        if (next_obs < obs_times.size() && res.terminal.t + h >= obs_times[next_obs] - 1e-14) {
            h = obs_times[next_obs] - res.terminal.t;
            clamped = true;
        }

        trial = res.terminal;
        try {
            forward_step(trial, field, tab, h, coupling, ws, &res.counters, ws.est);
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string(e.what()) + " at solver step " +
                                      std::to_string(res.terminal.n),
                                  res.terminal.n, e.stage_index, e.time);
        }

        // Estimate comes from the forward sub-step Psi_h(t_n, z_n); the norm
        // is scaled against the z component it stepped.
        const double err = error_norm(ws.est, res.terminal.z, trial.z, cfg);

        Proposal prop;
        try {
            prop = propose(err, err_prev, h, cfg);
        } catch (const StiffnessError&) {
            throw StiffnessError("adaptive step size underflowed h_min", res.terminal.t, h);
        }

        if (prop.accept) {
            res.terminal = trial;
            res.record.h.push_back(h);
            ++res.counters.steps_forward;
            ++res.counters.accepted_steps;
            err_prev = err;
            if (on_state) on_state(res.terminal);
            if (next_obs < obs_times.size() &&
                std::abs(res.terminal.t - obs_times[next_obs]) <= 1e-12) {
                res.record.obs_indices.push_back(res.terminal.n);
                emit(next_obs, res.terminal.n);
                ++next_obs;
            }
            // A clamp is no verdict on accuracy; resume from the controller's
            // own proposal in that case.
            h_prop = clamped ? std::max(prop.h_next, h_prop) : prop.h_next;
        } else {
            ++res.counters.rejected_steps;
            ++res.record.rejections;
            h_prop = prop.h_next;
        }
        if (res.record.h.size() > 100'000'000) {
            throw ResourceError("adaptive solve exceeded step budget");
        }
    }
    res.record.err_prev_final = err_prev;
    return res;
}

void adjoint_step_update(const VectorField& field, const ButcherTableau& tab, double h,
                         double lambda, double t_np1, std::span<const double> y_np1, double t_n,
                         std::span<const double> z_n, Vec& ybar, Vec& zbar, Vec& theta_bar,
                         EngineScratch& ws, SolveCounters& counters) {
    const std::size_t d = ybar.size();

    // ybar_{n+1} -= zbar_{n+1} . dPsi_{-h}(t_{n+1}, y_{n+1})/dy,
    // theta_bar  -= zbar_{n+1} . dPsi_{-h}(t_{n+1}, y_{n+1})/dtheta.
    rk_step_vjp(field, tab, t_np1, y_np1, -h, zbar, ws.pull, theta_bar, -1.0, ws.rk);
    for (std::size_t m = 0; m < d; ++m) ybar[m] -= ws.pull[m];
    ++counters.vjp_evals;

    // zbar_n = zbar_{n+1} + (1 - lambda) ybar_{n+1} + ybar_{n+1} . dPsi_h(t_n, z_n)/dz,
    // theta_bar += ybar_{n+1} . dPsi_h(t_n, z_n)/dtheta.
    rk_step_vjp(field, tab, t_n, z_n, h, ybar, ws.pull, theta_bar, 1.0, ws.rk);
    for (std::size_t m = 0; m < d; ++m) zbar[m] += (1.0 - lambda) * ybar[m] + ws.pull[m];
    ++counters.vjp_evals;

    // ybar_n = lambda ybar_{n+1}.
    vec::scale(ybar, lambda);
}

BackpropResult reversible_backprop(const VectorField& field, const ButcherTableau& tab,
                                   const ReversibleState& terminal, const StepRecord& record,
                                   Coupling coupling, const LossSeed& seed,
                                   const BackpropOptions& opts) {
    const std::size_t d = terminal.dim();
    const std::size_t n_steps = record.n_steps();
    if (terminal.n != n_steps) {
        throw ConfigError("terminal state index does not match the step record");
    }
    const Coupling back_coupling(opts.lambda_backward_override > 0.0 ? opts.lambda_backward_override
                                                                     : coupling.lambda);

    BackpropResult res;
    res.theta_bar.assign(field.param_count(), 0.0);
    res.adjoint.ybar.assign(d, 0.0);
    res.adjoint.zbar.assign(d, 0.0);
    res.initial = terminal;
    // Live persistent vectors: (y, z) plus (ybar, zbar), independent of N.
    res.counters.stored_state_peak = 2;
    res.counters.live_adjoint_vectors_peak = 4;

    EngineScratch ws;
    ws.resize(tab.stages, d);
    Vec gtmp(d, 0.0);

    auto inject = [&](std::size_t ordinal, std::size_t step_index) {
        if (!seed.grad) return;
        vec::fill(gtmp, 0.0);
        seed.grad(ordinal, step_index, res.initial.t, res.initial.y, gtmp);
        vec::axpy(1.0, gtmp, res.adjoint.ybar);
    };

    std::size_t obs_remaining = seed.obs_indices.size();
    if (obs_remaining > 0 && seed.obs_indices.back() == n_steps) {
        inject(obs_remaining - 1, n_steps);
        --obs_remaining;
    }

    ReversibleState verify_state;
    for (std::size_t n = n_steps; n-- > 0;) {
        const double h = record.h[n];
        const double t_np1 = res.initial.t;
        ws.save_y = res.initial.y;
        if (opts.verify) ws.save_z = res.initial.z;

        try {
            backward_step(res.initial, field, tab, h, back_coupling, ws, &res.counters);
        } catch (const DivergenceError& e) {
            throw ReversibilityError(
                "backward reconstruction diverged at step " + std::to_string(n) + ": " + e.what(), n);
        }
        ++res.counters.steps_backward;
        if (!res.initial.finite()) {
            throw ReversibilityError("backward reconstruction produced non-finite state at step " +
                                         std::to_string(n),
                                     n);
        }

        if (opts.verify) {
            verify_state = res.initial;
            forward_step(verify_state, field, tab, h, back_coupling, ws, &res.counters);
            double mism = std::max(vec::rel_linf(verify_state.y, ws.save_y),
                                   vec::rel_linf(verify_state.z, ws.save_z));
            res.max_verify_mismatch = std::max(res.max_verify_mismatch, mism);
            if (mism > opts.verify_tol) {
                throw ReversibilityError("reversibility breakdown at step " + std::to_string(n) +
                                             " (local mismatch " + std::to_string(mism) + ")",
                                         n);
            }
        }

        adjoint_step_update(field, tab, h, coupling.lambda, t_np1, ws.save_y, res.initial.t,
                            res.initial.z, res.adjoint.ybar, res.adjoint.zbar, res.theta_bar, ws,
                            res.counters);

        if (obs_remaining > 0 && seed.obs_indices[obs_remaining - 1] == n) {
            inject(obs_remaining - 1, n);
            --obs_remaining;
        }
    }
    return res;
}

}  // namespace revode
