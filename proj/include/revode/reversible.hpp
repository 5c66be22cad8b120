#pragma once

#include <functional>
#include <variant>

#include "revode/counters.hpp"
#include "revode/field.hpp"
#include "revode/rk_step.hpp"
#include "revode/step_control.hpp"
#include "revode/tableau.hpp"
#include "revode/vec.hpp"

namespace revode {

// Coupling parameter of the reversible scheme, in (0, 1].
struct Coupling {
    explicit Coupling(double l);
    double lambda;
};

// The pair (t, y, z) evolved by the coupled scheme. At n = 0, y == z == y0.
struct ReversibleState {
    double t = 0.0;
    Vec y;
    Vec z;
    std::size_t n = 0;

    static ReversibleState initial(Vec y0, double t0 = 0.0);
    std::size_t dim() const { return y.size(); }
    bool finite() const { return vec::all_finite(y) && vec::all_finite(z); }
};

struct AdjointState {
    Vec ybar;
    Vec zbar;
};

// Buffers reused across steps of one solve.
struct EngineScratch {
    StepScratch rk;
    Vec psi;
    Vec est;
    Vec pull;
    Vec save_y;
    Vec save_z;

    void resize(std::size_t stages, std::size_t d) {
        rk.resize(stages, d);
        psi.assign(d, 0.0);
        est.assign(d, 0.0);
        pull.assign(d, 0.0);
        save_y.assign(d, 0.0);
        save_z.assign(d, 0.0);
    }
};

// One coupled step:
//   y_{n+1} = lambda y_n + (1 - lambda) z_n + Psi_h(t_n, z_n)
//   z_{n+1} = z_n - Psi_{-h}(t_{n+1}, y_{n+1})
// When err_out is non-empty the embedded estimate of the forward sub-step
// Psi_h(t_n, z_n) is written there.
void forward_step(ReversibleState& s, const VectorField& field, const ButcherTableau& tab,
                  double h, Coupling coupling, EngineScratch& ws,
                  SolveCounters* counters = nullptr, std::span<double> err_out = {});

// Exact algebraic inverse:
//   z_n = z_{n+1} + Psi_{-h}(t_{n+1}, y_{n+1})
//   y_n = lambda^{-1} y_{n+1} + (1 - lambda^{-1}) z_n - lambda^{-1} Psi_h(t_n, z_n)
void backward_step(ReversibleState& s, const VectorField& field, const ButcherTableau& tab,
                   double h, Coupling coupling, EngineScratch& ws,
                   SolveCounters* counters = nullptr);

struct FixedSchedule {
    std::size_t n_steps = 0;
    double h = 0.0;
};

struct AdaptiveSchedule {
    ControllerConfig cfg;
};

using Schedule = std::variant<FixedSchedule, AdaptiveSchedule>;

// Called at each observation time with the current y. ordinal indexes into
// the observation list, step_index is the solver step the time landed on.
using Observer =
    std::function<void(std::size_t ordinal, std::size_t step_index, double t, std::span<const double> y)>;

struct ForwardSolveResult {
    ReversibleState terminal;
    StepRecord record;
    SolveCounters counters;
};

// Fires once for the initial state and once per accepted step; the tape and
// checkpointing engines hang their storage policies off it.
using StateCallback = std::function<void(const ReversibleState&)>;

// Iterates forward_step from t0 over [t0, t0 + duration], streaming solution
// values at the observation times into `observer` without retaining the
// trajectory. Fixed schedules require duration == n_steps * h and observation
// times on the grid; adaptive schedules clamp steps to land on them.
ForwardSolveResult solve_forward(const VectorField& field, const ButcherTableau& tab, const Vec& y0,
                                 double t0, double duration, const Schedule& schedule,
                                 Coupling coupling, const std::vector<double>& obs_times = {},
                                 const Observer& observer = {}, const StateCallback& on_state = {});

// Supplies dL/dy at each observation index; called with the reconstructed
// (or taped) state so that nothing state-sized needs to be stored for it.
struct LossSeed {
    std::vector<std::size_t> obs_indices;  // sorted ascending, values in [0, N]
    std::function<void(std::size_t ordinal, std::size_t step_index, double t,
                       std::span<const double> y, std::span<double> grad_out)>
        grad;
};

struct BackpropOptions {
    bool verify = false;        // re-run one forward step per reconstruction and compare
    double verify_tol = 1e-6;   // relative mismatch that raises ReversibilityError
    double lambda_backward_override = 0.0;  // nonzero: use this lambda on the backward pass
};

struct BackpropResult {
    Vec theta_bar;
    AdjointState adjoint;          // ybar, zbar at n = 0
    ReversibleState initial;       // reconstructed state at n = 0
    SolveCounters counters;
    double max_verify_mismatch = 0.0;
};

// Walks the recorded grid backwards from the terminal state, reconstructing
// each state in closed form and propagating the adjoints. Exactly one
// ReversibleState and one AdjointState are live at any time.
BackpropResult reversible_backprop(const VectorField& field, const ButcherTableau& tab,
                                   const ReversibleState& terminal, const StepRecord& record,
                                   Coupling coupling, const LossSeed& seed,
                                   const BackpropOptions& opts = {});

// Shared adjoint update for one step, used by every gradient engine. Both
// endpoint states of step n are supplied by the caller (reconstructed, taped
// or recomputed); ybar/zbar are pulled from n+1 back to n and theta_bar is
// accumulated.
void adjoint_step_update(const VectorField& field, const ButcherTableau& tab, double h,
                         double lambda, double t_np1, std::span<const double> y_np1, double t_n,
                         std::span<const double> z_n, Vec& ybar, Vec& zbar, Vec& theta_bar,
                         EngineScratch& ws, SolveCounters& counters);

}  // namespace revode
