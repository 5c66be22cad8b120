#pragma once

#include <cstdint>
#include <vector>

#include "revode/reversible.hpp"

namespace revode {

// Per-step records of a completed forward solve, replayable to bit-identical
// results. Row n holds (t_n, y_n, z_n); there are N + 1 rows.
struct Tape {
    std::size_t dim = 0;
    std::vector<double> t;
    Vec ys;  // (N + 1) x dim, row-major
    Vec zs;

    std::size_t rows() const { return t.size(); }
    std::span<const double> y(std::size_t n) const { return {ys.data() + n * dim, dim}; }
    std::span<const double> z(std::size_t n) const { return {zs.data() + n * dim, dim}; }
};

struct BaselineResult {
    Vec theta_bar;
    Vec ybar0;
    Vec zbar0;
    ReversibleState terminal;
    StepRecord record;
    SolveCounters counters;
};

// What a gradient engine needs besides the solve definition: where to
// observe, what to do with forward predictions, and the per-observation
// loss gradient.
struct GradientRequest {
    std::vector<double> obs_times;
    Observer observer;  // forward streaming (e.g. scalar loss accumulation)
    std::function<void(std::size_t ordinal, std::size_t step_index, double t,
                       std::span<const double> y, std::span<double> grad_out)>
        grad;
};

// Reverse sweep over a full tape of stored states. The gradient oracle the
// other engines are checked against.
BaselineResult full_tape_backprop(const VectorField& field, const ButcherTableau& tab,
                                  const Vec& y0, double t0, double duration,
                                  const Schedule& schedule, Coupling coupling,
                                  const GradientRequest& request,
                                  std::size_t max_tape_doubles = 200'000'000);

// Binomial (revolve-style) checkpointing for fixed schedules, a
// doubling-segment online variant for adaptive ones. Stores at most c
// snapshots at any time; gradients match the full tape bit for bit up to
// floating-point associativity.
BaselineResult checkpointed_backprop(const VectorField& field, const ButcherTableau& tab,
                                     const Vec& y0, double t0, double duration,
                                     const Schedule& schedule, Coupling coupling,
                                     const GradientRequest& request, std::size_t c);

// Reversible engine behind the same interface (solve_forward +
// reversible_backprop), so callers can swap engines freely.
BaselineResult reversible_engine_backprop(const VectorField& field, const ButcherTableau& tab,
                                          const Vec& y0, double t0, double duration,
                                          const Schedule& schedule, Coupling coupling,
                                          const GradientRequest& request,
                                          const BackpropOptions& opts = {});

// Minimal total forward-step cost (initial pass included) of reversing
// n steps with s free snapshot slots beyond the stored left state, under the
// cost model of checkpointed_backprop. Exposed for the scheduling decision;
// tests re-derive it independently by brute force.
std::int64_t binomial_schedule_cost(std::size_t n, std::size_t s);

// Records a tape directly; used by replay tests.
Tape record_tape(const VectorField& field, const ButcherTableau& tab, const Vec& y0, double t0,
                 double duration, const Schedule& schedule, Coupling coupling);

}  // namespace revode
