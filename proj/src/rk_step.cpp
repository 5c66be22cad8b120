#include "revode/rk_step.hpp"

#include <cmath>

#include "revode/errors.hpp"

namespace revode {

namespace {

// Fills ws.k with the stage derivatives; ws.u is the stage-state work buffer.
void compute_stages(const VectorField& field, const ButcherTableau& tab, double t,
                    std::span<const double> y, double h, StepScratch& ws) {
    const std::size_t s = tab.stages;
    const std::size_t d = y.size();
    for (std::size_t i = 0; i < s; ++i) {
        for (std::size_t m = 0; m < d; ++m) ws.u[m] = y[m];
        for (std::size_t j = 0; j < i; ++j) {
            const double aij = tab.a_at(i, j);
            if (aij == 0.0) continue;
            const double w = h * aij;
            const double* kj = ws.k.data() + j * d;
            for (std::size_t m = 0; m < d; ++m) ws.u[m] += w * kj[m];
        }
        std::span<double> ki(ws.k.data() + i * d, d);
        field.evaluate(t + tab.c[i] * h, ws.u, ki);
        for (std::size_t m = 0; m < d; ++m) {
            if (!std::isfinite(ki[m])) {
                throw DivergenceError("non-finite stage value in tableau '" + tab.name + "'",
                                      /*step=*/0, /*stage=*/i, t);
            }
        }
    }
}

}  // namespace

void rk_step(const VectorField& field, const ButcherTableau& tab, double t,
             std::span<const double> y, double h, std::span<double> increment,
             std::span<double> err_estimate, StepScratch& ws) {
    const std::size_t s = tab.stages;
    const std::size_t d = y.size();
    if (ws.k.size() != s * d) ws.resize(s, d);

    compute_stages(field, tab, t, y, h, ws);

    for (std::size_t m = 0; m < d; ++m) increment[m] = 0.0;
    for (std::size_t i = 0; i < s; ++i) {
        const double w = h * tab.b[i];
        if (w == 0.0) continue;
        const double* ki = ws.k.data() + i * d;
        for (std::size_t m = 0; m < d; ++m) increment[m] += w * ki[m];
    }

    if (!err_estimate.empty()) {
        if (!tab.has_embedded()) {
            throw ConfigError("tableau '" + tab.name + "' has no embedded error estimate");
        }
        for (std::size_t m = 0; m < d; ++m) err_estimate[m] = 0.0;
        for (std::size_t i = 0; i < s; ++i) {
            const double w = h * (tab.b[i] - tab.b_err[i]);
            if (w == 0.0) continue;
            const double* ki = ws.k.data() + i * d;
            for (std::size_t m = 0; m < d; ++m) err_estimate[m] += w * ki[m];
        }
    }
}

void rk_step_vjp(const VectorField& field, const ButcherTableau& tab, double t,
                 std::span<const double> y, double h, std::span<const double> v,
                 std::span<double> vjp_y, std::span<double> vjp_params, double theta_scale,
                 StepScratch& ws) {
    const std::size_t s = tab.stages;
    const std::size_t d = y.size();
    if (ws.k.size() != s * d) ws.resize(s, d);

    compute_stages(field, tab, t, y, h, ws);

    // increment = h sum_i b_i k_i, so each stage starts with kbar_i = h b_i v.
    for (std::size_t i = 0; i < s; ++i) {
        const double w = h * tab.b[i];
        double* kb = ws.kbar.data() + i * d;
        for (std::size_t m = 0; m < d; ++m) kb[m] = w * v[m];
    }

    for (std::size_t m = 0; m < d; ++m) vjp_y[m] = 0.0;

    // Walk the stage graph backwards. Stage i's state u_i must be rebuilt
    // before pulling kbar_i through the field.
    for (std::size_t i = s; i-- > 0;) {
        for (std::size_t m = 0; m < d; ++m) ws.u[m] = y[m];
        for (std::size_t j = 0; j < i; ++j) {
            const double aij = tab.a_at(i, j);
            if (aij == 0.0) continue;
            const double w = h * aij;
            const double* kj = ws.k.data() + j * d;
            for (std::size_t m = 0; m < d; ++m) ws.u[m] += w * kj[m];
        }
        std::span<const double> kb(ws.kbar.data() + i * d, d);
        field.vjp(t + tab.c[i] * h, ws.u, kb, ws.ubar, vjp_params, theta_scale);

        // u_i = y + h sum_j a_ij k_j distributes ubar to y and earlier stages.
        for (std::size_t m = 0; m < d; ++m) vjp_y[m] += ws.ubar[m];
        for (std::size_t j = 0; j < i; ++j) {
            const double aij = tab.a_at(i, j);
            if (aij == 0.0) continue;
            const double w = h * aij;
            double* kbj = ws.kbar.data() + j * d;
            for (std::size_t m = 0; m < d; ++m) kbj[m] += w * ws.ubar[m];
        }
    }
}

StepOutput step(const VectorField& field, const ButcherTableau& tab, double t, const Vec& y,
                double h, bool want_error) {
    StepScratch ws;
    StepOutput out;
    out.increment.assign(y.size(), 0.0);
    if (want_error) {
        out.error.emplace(y.size(), 0.0);
        rk_step(field, tab, t, y, h, out.increment, *out.error, ws);
    } else {
        rk_step(field, tab, t, y, h, out.increment, {}, ws);
    }
    return out;
}

std::pair<Vec, Vec> step_vjp(const VectorField& field, const ButcherTableau& tab, double t,
                             const Vec& y, double h, const Vec& v) {
    StepScratch ws;
    Vec vy(y.size(), 0.0);
    Vec vp(field.param_count(), 0.0);
    rk_step_vjp(field, tab, t, y, h, v, vy, vp, 1.0, ws);
    return {std::move(vy), std::move(vp)};
}

PlainSolveResult plain_solve_fixed(const VectorField& field, const ButcherTableau& tab,
                                   const Vec& y0, double t0, std::size_t n_steps, double h) {
    PlainSolveResult res;
    res.t = t0;
    res.y = y0;
    res.record.t0 = t0;
    res.record.h.assign(n_steps, h);
    StepScratch ws;
    Vec incr(y0.size());
    for (std::size_t n = 0; n < n_steps; ++n) {
        rk_step(field, tab, res.t, res.y, h, incr, {}, ws);
        for (std::size_t m = 0; m < res.y.size(); ++m) res.y[m] += incr[m];
        res.t += h;
    }
    return res;
}

PlainSolveResult plain_solve_adaptive(const VectorField& field, const ButcherTableau& tab,
                                      const Vec& y0, double t0, double duration,
                                      const ControllerConfig& cfg) {
    cfg.validate();
    if (!tab.has_embedded()) {
        throw ConfigError("adaptive solve requires embedded weights ('" + tab.name + "' has none)");
    }
    PlainSolveResult res;
    res.t = t0;
    res.y = y0;
    res.record.t0 = t0;

    StepScratch ws;
    const std::size_t d = y0.size();
    Vec incr(d), est(d), y_next(d);
    const double t_end = t0 + duration;
    double h_prop = cfg.h_init;
    double err_prev = 1.0;
    while (res.t < t_end - 1e-12 * std::max(1.0, std::abs(t_end))) {
        double h = std::min(h_prop, cfg.h_max);
        bool clamped = false;
        if (res.t + h >= t_end) {
            h = t_end - res.t;
            clamped = true;
        }
        rk_step(field, tab, res.t, res.y, h, incr, est, ws);
        for (std::size_t m = 0; m < d; ++m) y_next[m] = res.y[m] + incr[m];
        const double err = error_norm(est, res.y, y_next, cfg);
        Proposal prop = propose(err, err_prev, h, cfg);
        if (prop.accept) {
            res.y = y_next;
            res.t += h;
            res.record.h.push_back(h);
            err_prev = err;
            h_prop = clamped ? std::max(prop.h_next, h_prop) : prop.h_next;
        } else {
            ++res.record.rejections;
            h_prop = prop.h_next;
        }
    }
    res.record.err_prev_final = err_prev;
    return res;
}

}  // namespace revode
