#pragma once

#include <optional>
#include <span>

#include "revode/field.hpp"
#include "revode/tableau.hpp"
#include "revode/vec.hpp"

namespace revode {

// Reusable stage buffers so the hot loops never allocate.
struct StepScratch {
    Vec k;     // stages x d stage derivatives
    Vec u;     // d, stage state
    Vec kbar;  // stages x d, stage cotangents (vjp only)
    Vec ubar;  // d

    void resize(std::size_t stages, std::size_t d) {
        k.assign(stages * d, 0.0);
        u.assign(d, 0.0);
        kbar.assign(stages * d, 0.0);
        ubar.assign(d, 0.0);
    }
};

// One explicit RK increment: increment = h sum_i b_i k_i with
// k_i = f(t + c_i h, y + h sum_j a_ij k_j). h may carry either sign.
// When err_estimate is non-empty and the tableau has embedded weights,
// err_estimate = h sum_i (b_i - b_err_i) k_i.
// Throws DivergenceError (with the stage index) on a non-finite stage.
void rk_step(const VectorField& field, const ButcherTableau& tab, double t,
             std::span<const double> y, double h, std::span<double> increment,
             std::span<double> err_estimate, StepScratch& ws);

// Exact reverse sweep through the stage recurrence:
//   vjp_y = v . d(increment)/dy   (overwritten)
//   vjp_params += theta_scale * v . d(increment)/dtheta
// Stages are recomputed here rather than cached across the solve, which is
// what keeps the reversible engine's state memory flat in N.
void rk_step_vjp(const VectorField& field, const ButcherTableau& tab, double t,
                 std::span<const double> y, double h, std::span<const double> v,
                 std::span<double> vjp_y, std::span<double> vjp_params, double theta_scale,
                 StepScratch& ws);

// Allocating wrappers.
struct StepOutput {
    Vec increment;
    std::optional<Vec> error;
};

StepOutput step(const VectorField& field, const ButcherTableau& tab, double t, const Vec& y,
                double h, bool want_error = false);

std::pair<Vec, Vec> step_vjp(const VectorField& field, const ButcherTableau& tab, double t,
                             const Vec& y, double h, const Vec& v);

}  // namespace revode

#include "revode/step_control.hpp"

namespace revode {

// Plain (non-coupled) solvers, used for reference trajectories and for
// comparing adaptive step counts against the coupled scheme.
struct PlainSolveResult {
    double t = 0.0;
    Vec y;
    StepRecord record;
};

PlainSolveResult plain_solve_fixed(const VectorField& field, const ButcherTableau& tab,
                                   const Vec& y0, double t0, std::size_t n_steps, double h);

PlainSolveResult plain_solve_adaptive(const VectorField& field, const ButcherTableau& tab,
                                      const Vec& y0, double t0, double duration,
                                      const ControllerConfig& cfg);

}  // namespace revode
