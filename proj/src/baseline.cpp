#include "revode/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "revode/errors.hpp"

namespace revode {

namespace {

constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;

// Cost recurrences, in solver-step units. reverse_cost(n, s) is the cost of
// reversing a range of n steps whose left state is stored, advances included;
// total_cost(n, s) additionally rides the initial forward pass, whose
// advances write the first-descent checkpoints for free.
//   reverse_cost(1, s) = 1
//   reverse_cost(n, s) = min_k [k + reverse_cost(n-k, s-1) + reverse_cost(k, s)]
//   total_cost(1, s)   = 2
//   total_cost(n, s)   = min_k [k + total_cost(n-k, s-1) + reverse_cost(k, s)]
class SchedulePlan {
  public:
    std::int64_t reverse_cost(std::size_t n, std::size_t s) {
        if (n == 1) return 1;
        if (s == 0) return kInf;
        const Key key{n, s};
        auto it = rev_.find(key);
        if (it != rev_.end()) return it->second;
        std::int64_t best = kInf;
        for (std::size_t k = 1; k < n; ++k) {
            const std::int64_t right = reverse_cost(n - k, s - 1);
            if (right >= kInf) continue;
            const std::int64_t cand = static_cast<std::int64_t>(k) + right + reverse_cost(k, s);
            best = std::min(best, cand);
        }
        rev_[key] = best;
        return best;
    }

    std::int64_t total_cost(std::size_t n, std::size_t s) {
        if (n == 1) return 2;
        if (s == 0) return kInf;
        const Key key{n, s};
        auto it = tot_.find(key);
        if (it != tot_.end()) return it->second;
        std::int64_t best = kInf;
        for (std::size_t k = 1; k < n; ++k) {
            const std::int64_t right = total_cost(n - k, s - 1);
            if (right >= kInf) continue;
            const std::int64_t cand = static_cast<std::int64_t>(k) + right + reverse_cost(k, s);
            best = std::min(best, cand);
        }
        tot_[key] = best;
        return best;
    }

    std::size_t split(std::size_t n, std::size_t s, bool initial) {
        if (s == 1) return n - 1;  // the only feasible split
        if (n > kExactLimit) {
            // DP would be quadratic in n; a proportional split keeps the
            // budget respected at slightly suboptimal cost.
            return std::max<std::size_t>(1, (n * s) / (s + 1));
        }
        std::int64_t best = kInf;
        std::size_t best_k = n - 1;
        for (std::size_t k = 1; k < n; ++k) {
            const std::int64_t right = initial ? total_cost(n - k, s - 1) : reverse_cost(n - k, s - 1);
            if (right >= kInf) continue;
            const std::int64_t cand = static_cast<std::int64_t>(k) + right + reverse_cost(k, s);
            if (cand < best) {
                best = cand;
                best_k = k;
            }
        }
        return best_k;
    }

  private:
    static constexpr std::size_t kExactLimit = 4096;
    using Key = std::pair<std::size_t, std::size_t>;
    std::map<Key, std::int64_t> rev_;
    std::map<Key, std::int64_t> tot_;
};

LossSeed make_seed(const GradientRequest& request, std::vector<std::size_t> obs_indices) {
    LossSeed seed;
    seed.obs_indices = std::move(obs_indices);
    seed.grad = request.grad;
    return seed;
}

}  // namespace

std::int64_t binomial_schedule_cost(std::size_t n, std::size_t s) {
    SchedulePlan plan;
    return plan.total_cost(n, s);
}

Tape record_tape(const VectorField& field, const ButcherTableau& tab, const Vec& y0, double t0,
                 double duration, const Schedule& schedule, Coupling coupling) {
    Tape tape;
    tape.dim = y0.size();
    auto on_state = [&](const ReversibleState& s) {
        tape.t.push_back(s.t);
        tape.ys.insert(tape.ys.end(), s.y.begin(), s.y.end());
        tape.zs.insert(tape.zs.end(), s.z.begin(), s.z.end());
    };
    solve_forward(field, tab, y0, t0, duration, schedule, coupling, {}, {}, on_state);
    return tape;
}

BaselineResult full_tape_backprop(const VectorField& field, const ButcherTableau& tab,
                                  const Vec& y0, double t0, double duration,
                                  const Schedule& schedule, Coupling coupling,
                                  const GradientRequest& request, std::size_t max_tape_doubles) {
    const std::size_t d = y0.size();
    BaselineResult res;

    Tape tape;
    tape.dim = d;
    auto on_state = [&](const ReversibleState& s) {
        if ((tape.rows() + 1) * 2 * d > max_tape_doubles) {
            throw ResourceError("tape-size limit exceeded (" + std::to_string(max_tape_doubles) +
                                " doubles); raise the limit or use checkpointing");
        }
        tape.t.push_back(s.t);
        tape.ys.insert(tape.ys.end(), s.y.begin(), s.y.end());
        tape.zs.insert(tape.zs.end(), s.z.begin(), s.z.end());
    };

    auto fwd = solve_forward(field, tab, y0, t0, duration, schedule, coupling, request.obs_times,
                             request.observer, on_state);
    res.terminal = fwd.terminal;
    res.record = std::move(fwd.record);
    res.counters = fwd.counters;
    const std::size_t n_steps = res.record.n_steps();
    res.counters.stored_state_peak = static_cast<std::int64_t>(2 * tape.rows());
    res.counters.live_adjoint_vectors_peak = static_cast<std::int64_t>(2 * tape.rows()) + 2;

    LossSeed seed = make_seed(request, res.record.obs_indices);

    res.theta_bar.assign(field.param_count(), 0.0);
    res.ybar0.assign(d, 0.0);
    res.zbar0.assign(d, 0.0);
    EngineScratch ws;
    ws.resize(tab.stages, d);
    Vec gtmp(d, 0.0);

    auto inject = [&](std::size_t ordinal, std::size_t step_index) {
        if (!seed.grad) return;
        vec::fill(gtmp, 0.0);
        seed.grad(ordinal, step_index, tape.t[step_index], tape.y(step_index), gtmp);
        vec::axpy(1.0, gtmp, res.ybar0);
    };

    std::size_t obs_remaining = seed.obs_indices.size();
    if (obs_remaining > 0 && seed.obs_indices.back() == n_steps) {
        inject(obs_remaining - 1, n_steps);
        --obs_remaining;
    }
    for (std::size_t n = n_steps; n-- > 0;) {
        adjoint_step_update(field, tab, res.record.h[n], coupling.lambda, tape.t[n + 1],
                            tape.y(n + 1), tape.t[n], tape.z(n), res.ybar0, res.zbar0,
                            res.theta_bar, ws, res.counters);
        if (obs_remaining > 0 && seed.obs_indices[obs_remaining - 1] == n) {
            inject(obs_remaining - 1, n);
            --obs_remaining;
        }
    }
    return res;
}

namespace {

// Shared backward recursion for both checkpointing variants. Snapshots live
// in `store`; the pool tracks the peak slot usage against the budget.
class CheckpointSweep {
  public:
    CheckpointSweep(const VectorField& field, const ButcherTableau& tab, Coupling coupling,
                    const StepRecord& record, const LossSeed& seed, std::size_t budget,
                    SolveCounters& counters, SchedulePlan& plan)
        : field_(field),
          tab_(tab),
          coupling_(coupling),
          record_(record),
          seed_(seed),
          budget_(budget),
          counters_(counters),
          plan_(plan) {}

    std::map<std::size_t, ReversibleState> store;

    void note_stored() {
        counters_.checkpoint_slots_peak =
            std::max(counters_.checkpoint_slots_peak, static_cast<std::int64_t>(store.size()));
        if (store.size() > budget_) {
            throw ResourceError("checkpoint budget exceeded: " + std::to_string(store.size()) +
                                " > " + std::to_string(budget_));
        }
    }

    void init_adjoints(std::size_t d, std::size_t param_count, const ReversibleState& terminal) {
        ybar_.assign(d, 0.0);
        zbar_.assign(d, 0.0);
        theta_bar_.assign(param_count, 0.0);
        ws_.resize(tab_.stages, d);
        gtmp_.assign(d, 0.0);
        obs_remaining_ = seed_.obs_indices.size();
        if (obs_remaining_ > 0 && seed_.obs_indices.back() == record_.n_steps()) {
            inject(obs_remaining_ - 1, record_.n_steps(), terminal.t, terminal.y);
            --obs_remaining_;
        }
    }

    // Reverse steps i..j-1. Precondition: store holds state i; interior
    // states are only present when this range lies on the initial pass's
    // first-descent spine (on_spine), whose snapshots were written for free.
    // Split choices must mirror the placement exactly, so the spine uses the
    // total-cost splits and everything else the reverse-cost splits.
    void reverse_range(std::size_t i, std::size_t j, std::size_t s_free, bool on_spine) {
        if (j - i == 1) {
            leaf(i);
            return;
        }
        if (s_free == 0) {
            throw ResourceError("checkpoint recursion ran out of slots");
        }
        const std::size_t m = i + plan_.split(j - i, s_free, on_spine);
        if (!store.count(m)) {
            ReversibleState s = store.at(i);
            advance(s, m);
            store.emplace(m, std::move(s));
            note_stored();
        }
        reverse_range(m, j, s_free - 1, on_spine);
        store.erase(m);
        reverse_range(i, m, s_free, false);
    }

    Vec take_theta_bar() { return std::move(theta_bar_); }
    Vec take_ybar() { return std::move(ybar_); }
    Vec take_zbar() { return std::move(zbar_); }

  private:
    void advance(ReversibleState& s, std::size_t to) {
        while (s.n < to) {
            forward_step(s, field_, tab_, record_.h[s.n], coupling_, ws_, &counters_);
            ++counters_.steps_backward;  // recomputation, charged to the backward phase
        }
    }

    void leaf(std::size_t i) {
        const ReversibleState& left = store.at(i);
        ReversibleState right = left;
        forward_step(right, field_, tab_, record_.h[i], coupling_, ws_, &counters_);
        ++counters_.steps_backward;
        adjoint_step_update(field_, tab_, record_.h[i], coupling_.lambda, right.t, right.y, left.t,
                            left.z, ybar_, zbar_, theta_bar_, ws_, counters_);
        if (obs_remaining_ > 0 && seed_.obs_indices[obs_remaining_ - 1] == i) {
            inject(obs_remaining_ - 1, i, left.t, left.y);
            --obs_remaining_;
        }
    }

    void inject(std::size_t ordinal, std::size_t step_index, double t, std::span<const double> y) {
        if (!seed_.grad) return;
        vec::fill(gtmp_, 0.0);
        seed_.grad(ordinal, step_index, t, y, gtmp_);
        vec::axpy(1.0, gtmp_, ybar_);
    }

    const VectorField& field_;
    const ButcherTableau& tab_;
    Coupling coupling_;
    const StepRecord& record_;
    const LossSeed& seed_;
    std::size_t budget_;
    SolveCounters& counters_;
    SchedulePlan& plan_;

    EngineScratch ws_;
    Vec ybar_, zbar_, theta_bar_, gtmp_;
    std::size_t obs_remaining_ = 0;
};

}  // namespace

BaselineResult checkpointed_backprop(const VectorField& field, const ButcherTableau& tab,
                                     const Vec& y0, double t0, double duration,
                                     const Schedule& schedule, Coupling coupling,
                                     const GradientRequest& request, std::size_t c) {
    if (c < 2) throw ConfigError("checkpointed_backprop requires a budget of at least 2");
    const std::size_t d = y0.size();
    const bool fixed = std::holds_alternative<FixedSchedule>(schedule);

    BaselineResult res;
    SchedulePlan plan;

    // --- forward pass, placing checkpoints as it goes -----------------------
    std::map<std::size_t, ReversibleState> store;
    std::int64_t slots_peak = 0;
    auto note_stored = [&]() {
        slots_peak = std::max(slots_peak, static_cast<std::int64_t>(store.size()));
    };

    if (fixed) {
        // First-descent positions of the offline binomial recursion get their
        // snapshots written during the initial pass.
        const std::size_t n_steps = std::get<FixedSchedule>(schedule).n_steps;
        std::vector<std::size_t> positions;
        {
            std::size_t i = 0, n = n_steps, s = c - 1;
            while (n >= 2 && s >= 1) {
                const std::size_t k = plan.split(n, s, true);
                positions.push_back(i + k);
                i += k;
                n -= k;
                s -= 1;
            }
        }
        auto pos_it = positions.begin();
        auto on_state = [&](const ReversibleState& s) {
            if (s.n == 0 || (pos_it != positions.end() && *pos_it == s.n)) {
                if (s.n != 0) ++pos_it;
                store.emplace(s.n, s);
                note_stored();
            }
        };
        auto fwd = solve_forward(field, tab, y0, t0, duration, schedule, coupling,
                                 request.obs_times, request.observer, on_state);
        res.terminal = fwd.terminal;
        res.record = std::move(fwd.record);
        res.counters = fwd.counters;
    } else {
        // Online doubling policy: keep every stride-th state, at most c - 1
        // snapshots, so one slot is always free for the backward recursion.
        const std::size_t cap = c - 1;
        std::size_t stride = 1;
        auto on_state = [&](const ReversibleState& s) {
            if (s.n % stride != 0) return;
            store.emplace(s.n, s);
            while (store.size() > cap) {
                stride *= 2;
                for (auto it = store.begin(); it != store.end();) {
                    if (it->first % stride != 0) it = store.erase(it);
                    else ++it;
                }
            }
            note_stored();
        };
        auto fwd = solve_forward(field, tab, y0, t0, duration, schedule, coupling,
                                 request.obs_times, request.observer, on_state);
        res.terminal = fwd.terminal;
        res.record = std::move(fwd.record);
        res.counters = fwd.counters;
    }

    const std::size_t n_steps = res.record.n_steps();
    LossSeed seed = make_seed(request, res.record.obs_indices);

    // --- backward sweep ------------------------------------------------------
    CheckpointSweep sweep(field, tab, coupling, res.record, seed, c, res.counters, plan);
    sweep.store = std::move(store);
    res.counters.checkpoint_slots_peak = slots_peak;
    sweep.note_stored();
    sweep.init_adjoints(d, field.param_count(), res.terminal);

    if (n_steps > 0) {
        if (fixed) {
            sweep.reverse_range(0, n_steps, c - 1, true);
        } else {
            // Segments between consecutive snapshots, topmost first. Each
            // consumed right anchor frees its slot for the segments below.
            std::vector<std::size_t> anchors;
            for (const auto& [idx, st] : sweep.store) anchors.push_back(idx);
            if (!anchors.empty() && anchors.back() == n_steps) {
                sweep.store.erase(anchors.back());
                anchors.pop_back();
            }
            for (std::size_t a = anchors.size(); a-- > 0;) {
                const std::size_t lo = anchors[a];
                const std::size_t hi = (a + 1 < anchors.size()) ? anchors[a + 1] : n_steps;
                if (a + 1 < anchors.size()) sweep.store.erase(anchors[a + 1]);
                if (hi > lo) {
                    sweep.reverse_range(lo, hi, c - sweep.store.size(), false);
                }
            }
        }
    }

    res.theta_bar = sweep.take_theta_bar();
    res.ybar0 = sweep.take_ybar();
    res.zbar0 = sweep.take_zbar();
    res.counters.stored_state_peak = 2 * res.counters.checkpoint_slots_peak;
    res.counters.live_adjoint_vectors_peak = 2 * res.counters.checkpoint_slots_peak + 2;
    return res;
}

BaselineResult reversible_engine_backprop(const VectorField& field, const ButcherTableau& tab,
                                          const Vec& y0, double t0, double duration,
                                          const Schedule& schedule, Coupling coupling,
                                          const GradientRequest& request,
                                          const BackpropOptions& opts) {
    auto fwd = solve_forward(field, tab, y0, t0, duration, schedule, coupling, request.obs_times,
                             request.observer);
    LossSeed seed = make_seed(request, fwd.record.obs_indices);
    auto back = reversible_backprop(field, tab, fwd.terminal, fwd.record, coupling, seed, opts);

    BaselineResult res;
    res.theta_bar = std::move(back.theta_bar);
    res.ybar0 = std::move(back.adjoint.ybar);
    res.zbar0 = std::move(back.adjoint.zbar);
    res.terminal = std::move(fwd.terminal);
    res.record = std::move(fwd.record);
    res.counters = fwd.counters;
    res.counters.steps_backward = back.counters.steps_backward;
    res.counters.psi_evals += back.counters.psi_evals;
    res.counters.vjp_evals += back.counters.vjp_evals;
    res.counters.stored_state_peak = back.counters.stored_state_peak;
    res.counters.live_adjoint_vectors_peak = back.counters.live_adjoint_vectors_peak;
    return res;
}

}  // namespace revode
