#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "revode/baseline.hpp"
#include "revode/errors.hpp"
#include "revode/field.hpp"
#include "revode/reversible.hpp"
#include "revode/rng.hpp"
#include "revode/stats.hpp"
#include "test_helpers.hpp"

using namespace revode;

namespace {

ReversibleState make_state(Vec y0) { return ReversibleState::initial(std::move(y0), 0.0); }

double state_rel_error(const ReversibleState& a, const ReversibleState& b) {
    Vec da(a.y.size() * 2), db(a.y.size() * 2);
    for (std::size_t i = 0; i < a.y.size(); ++i) {
        da[i] = a.y[i];
        da[a.y.size() + i] = a.z[i];
        db[i] = b.y[i];
        db[a.y.size() + i] = b.z[i];
    }
    return vec::rel_linf(da, db);
}

}  // namespace

TEST_CASE("coupling: domain validation") {
    CHECK_THROWS_AS(Coupling(0.0), ConfigError);
    CHECK_THROWS_AS(Coupling(-0.5), ConfigError);
    CHECK_THROWS_AS(Coupling(1.5), ConfigError);
    CHECK(Coupling(1.0).lambda == 1.0);
    CHECK(Coupling(0.99).lambda == 0.99);
}

TEST_CASE("forward step: stationary under the zero field for any lambda") {
    MlpField f(2, 4, MlpField::zero_params(2, 4));
    const auto tab = make_tableau("rk4");
    EngineScratch ws;
    ws.resize(tab.stages, 2);
    for (double lambda : {0.5, 0.99, 1.0}) {
        auto s = make_state({1.5, -0.5});
        for (int n = 0; n < 5; ++n) forward_step(s, f, tab, 0.1, Coupling(lambda), ws);
        CHECK(s.y == Vec{1.5, -0.5});
        CHECK(s.z == Vec{1.5, -0.5});
        CHECK(s.n == 5);
    }
}

TEST_CASE("forward step: hand-evaluated euler example") {
    // lambda 0.99, h 0.1, alpha -1, y0 = z0 = 1:
    //   Psi_h(z0) = -0.1, y1 = 0.99 + 0.01 - 0.1 = 0.9
    //   Psi_{-h}(y1) = +0.1 * (-1) * 0.9 * (-1) = 0.09, z1 = 1 - 0.09 = 0.91
    LinearField f(1, -1.0);
    const auto tab = make_tableau("euler");
    EngineScratch ws;
    ws.resize(1, 1);
    auto s = make_state({1.0});
    forward_step(s, f, tab, 0.1, Coupling(0.99), ws);
    CHECK(s.y[0] == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(s.z[0] == doctest::Approx(0.91).epsilon(1e-15));
    CHECK(s.t == doctest::Approx(0.1).epsilon(1e-15));

    backward_step(s, f, tab, 0.1, Coupling(0.99), ws);
    CHECK(s.y[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.z[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.n == 0);
}

TEST_CASE("backward step: identity map for zero field at lambda 1") {
    MlpField f(1, 4, MlpField::zero_params(1, 4));
    const auto tab = make_tableau("midpoint");
    EngineScratch ws;
    ws.resize(tab.stages, 1);
    auto s = make_state({0.7});
    s.n = 1;
    s.t = 0.1;
    backward_step(s, f, tab, 0.1, Coupling(1.0), ws);
    CHECK(s.y[0] == 0.7);
    CHECK(s.z[0] == 0.7);
}

TEST_CASE("roundtrip: single step reconstruction across tableaux, lambdas, steps") {
    Rng rng(12);
    for (const auto& name : tableau_names()) {
        const auto tab = make_tableau(name);
        for (double lambda : {0.99, 0.999, 1.0}) {
            for (double h : {1e-3, 1e-2, 1e-1}) {
                MlpField f(3, 10, MlpField::random_params(3, 10, rng.next_u64()));
                EngineScratch ws;
                ws.resize(tab.stages, 3);
                auto s = make_state({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
                const auto orig = s;
                forward_step(s, f, tab, h, Coupling(lambda), ws);
                backward_step(s, f, tab, h, Coupling(lambda), ws);
                CHECK(state_rel_error(s, orig) <= 1e-12);
            }
        }
    }
}

TEST_CASE("roundtrip: 1000-step rk4 drift on the mlp field stays under 1e-10") {
    const auto tab = make_tableau("rk4");
    for (double lambda : {0.99, 0.999, 1.0}) {
        MlpField f(2, 10, MlpField::random_params(2, 10, 2025));
        EngineScratch ws;
        ws.resize(tab.stages, 2);
        auto s = make_state({0.8, -0.3});
        const auto orig = s;
        const double h = 1e-3;
        for (int n = 0; n < 1000; ++n) forward_step(s, f, tab, h, Coupling(lambda), ws);
        for (int n = 0; n < 1000; ++n) backward_step(s, f, tab, h, Coupling(lambda), ws);
        const double drift = state_rel_error(s, orig);
        MESSAGE("lambda ", lambda, ": 1000-step reconstruction drift ", drift);
        CHECK(drift <= 1e-10);
    }
}

TEST_CASE("solve_forward: one step equals forward_step, observation at T sees y_N") {
    LinearField f(1, -1.0);
    const auto tab = make_tableau("rk4");
    const Coupling coupling(0.99);

    EngineScratch ws;
    ws.resize(tab.stages, 1);
    auto manual = make_state({1.0});
    forward_step(manual, f, tab, 0.25, coupling, ws);

    double seen = std::nan("");
    std::size_t seen_idx = 999;
    const auto res = solve_forward(f, tab, {1.0}, 0.0, 0.25, FixedSchedule{1, 0.25}, coupling,
                                   {0.25},
                                   [&](std::size_t, std::size_t idx, double, std::span<const double> y) {
                                       seen = y[0];
                                       seen_idx = idx;
                                   });
    CHECK(res.terminal.y[0] == manual.y[0]);
    CHECK(res.terminal.z[0] == manual.z[0]);
    CHECK(seen == res.terminal.y[0]);
    CHECK(seen_idx == 1);
    CHECK(res.record.h == Vec{0.25});
    CHECK(res.counters.stored_state_peak == 2);
}

TEST_CASE("solve_forward: rejects off-grid observations and bad schedules") {
    LinearField f(1, -1.0);
    const auto tab = make_tableau("rk4");
    CHECK_THROWS_AS(solve_forward(f, tab, {1.0}, 0.0, 1.0, FixedSchedule{10, 0.1}, Coupling(0.99),
                                  {0.1234}),
                    ConfigError);
    CHECK_THROWS_AS(solve_forward(f, tab, {1.0}, 0.0, 1.0, FixedSchedule{10, 0.05}, Coupling(0.99)),
                    ConfigError);
}

TEST_CASE("solve_forward: global order inherited from the base tableau") {
    LinearField f(1, -1.0);
    const Coupling coupling(0.999);
    const double exact = std::exp(-1.0);
    for (const auto& name : {"euler", "midpoint", "ralston3", "rk4"}) {
        const auto tab = make_tableau(name);
        std::vector<double> hs, errs;
        for (int p = 4; p <= 9; ++p) {
            const double h = std::pow(2.0, -p);
            const auto n = static_cast<std::size_t>(std::llround(1.0 / h));
            const auto res = solve_forward(f, tab, {1.0}, 0.0, 1.0, FixedSchedule{n, h}, coupling);
            const double err = std::abs(res.terminal.y[0] - exact);
            if (err > 1e-13) {
                hs.push_back(h);
                errs.push_back(err);
            }
        }
        REQUIRE(hs.size() >= 3);
        const double slope = fit_loglog_slope(hs, errs);
        MESSAGE(name, " reversible global order: ", slope);
        CHECK(std::abs(slope - tab.order) < 0.2);
    }
}

TEST_CASE("reversible_backprop: zero loss seed gives zero adjoints and gradient") {
    MlpField f(2, 6, MlpField::random_params(2, 6, 3));
    const auto tab = make_tableau("rk4");
    const Coupling coupling(0.99);
    const auto fwd = solve_forward(f, tab, {0.5, -0.5}, 0.0, 0.5, FixedSchedule{50, 0.01}, coupling);
    LossSeed seed;  // no observations at all
    const auto back = reversible_backprop(f, tab, fwd.terminal, fwd.record, coupling, seed);
    for (double v : back.theta_bar) CHECK(v == 0.0);
    for (double v : back.adjoint.ybar) CHECK(v == 0.0);
    for (double v : back.adjoint.zbar) CHECK(v == 0.0);
    CHECK(state_rel_error(back.initial, make_state({0.5, -0.5})) < 1e-11);
}

namespace {

// Shared fixture: MSE-to-zero loss at `n_obs` interior observation times.
struct GradFixture {
    GradFixture(std::size_t d, std::size_t n_steps, double h, std::size_t n_obs, std::uint64_t seed)
        : field(d, 10, MlpField::random_params(d, 10, seed)), n_steps(n_steps), h(h), dim(d) {
        Rng rng(seed ^ 0xabcdef);
        for (std::size_t i = 0; i < d; ++i) y0.push_back(rng.uniform(-1, 1));
        for (std::size_t k = 1; k <= n_obs; ++k) obs_times.push_back(k * n_steps / n_obs * h);
        scale = 1.0 / static_cast<double>(n_obs * d);
    }

    GradientRequest request() {
        GradientRequest r;
        r.obs_times = obs_times;
        r.grad = [this](std::size_t, std::size_t, double, std::span<const double> y,
                        std::span<double> g) {
            for (std::size_t c = 0; c < dim; ++c) g[c] = 2.0 * scale * y[c];
        };
        return r;
    }

    double loss() {
        double acc = 0.0;
        solve_forward(field, make_tableau("rk4"), y0, 0.0, n_steps * h,
                      FixedSchedule{n_steps, h}, Coupling(0.99), obs_times,
                      [&](std::size_t, std::size_t, double, std::span<const double> y) {
                          for (double v : y) acc += v * v;
                      });
        return acc * scale;
    }

    MlpField field;
    std::size_t n_steps;
    double h;
    std::size_t dim;
    Vec y0;
    std::vector<double> obs_times;
    double scale = 1.0;
};

}  // namespace

TEST_CASE("reversible_backprop: matches full tape and finite differences") {
    GradFixture fx(2, 100, 0.01, 10, 91);
    const auto tab = make_tableau("rk4");
    const Coupling coupling(0.99);

    auto req = fx.request();
    const auto tape = full_tape_backprop(fx.field, tab, fx.y0, 0.0, 1.0,
                                         FixedSchedule{100, 0.01}, coupling, req);
    const auto rev = reversible_engine_backprop(fx.field, tab, fx.y0, 0.0, 1.0,
                                                FixedSchedule{100, 0.01}, coupling, req);
    CHECK(vec::rel_linf(rev.theta_bar, tape.theta_bar) <= 1e-8);

    const Vec fd = test::fd_wrt_params(fx.field, [&] { return fx.loss(); });
    CHECK(vec::rel_linf(tape.theta_bar, fd) <= 1e-4);
}

TEST_CASE("reversible_backprop: one-step case agrees with the tape to 1e-12") {
    LinearField f(1, -1.0);
    const auto tab = make_tableau("euler");
    const Coupling coupling(0.99);
    GradientRequest req;
    req.obs_times = {0.1};
    req.grad = [](std::size_t, std::size_t, double, std::span<const double>, std::span<double> g) {
        g[0] = 1.0;  // L = y_1
    };
    const auto tape =
        full_tape_backprop(f, tab, {1.0}, 0.0, 0.1, FixedSchedule{1, 0.1}, coupling, req);
    const auto rev = reversible_engine_backprop(f, tab, {1.0}, 0.0, 0.1, FixedSchedule{1, 0.1},
                                                coupling, req);
    CHECK(vec::rel_linf(rev.theta_bar, tape.theta_bar) <= 1e-12);
    CHECK(vec::rel_linf(rev.ybar0, tape.ybar0) <= 1e-12);
    CHECK(vec::rel_linf(rev.zbar0, tape.zbar0) <= 1e-12);
}

TEST_CASE("reversible_backprop: work and memory counters") {
    GradFixture fx(2, 64, 0.01, 8, 17);
    const auto tab = make_tableau("rk4");
    const Coupling coupling(0.99);
    const auto fwd = solve_forward(fx.field, tab, fx.y0, 0.0, 0.64, FixedSchedule{64, 0.01},
                                   coupling, fx.obs_times);
    LossSeed seed;
    seed.obs_indices = fwd.record.obs_indices;
    auto req = fx.request();
    seed.grad = req.grad;
    const auto back =
        reversible_backprop(fx.field, tab, fwd.terminal, fwd.record, coupling, seed);

    // Per step: exactly 2 base-step evaluations (reconstruction) plus 2 vjps.
    CHECK(back.counters.steps_backward == 64);
    CHECK(back.counters.psi_evals == 2 * 64);
    CHECK(back.counters.vjp_evals == 2 * 64);
    // Live persistent state: (y, z) plus (ybar, zbar), independent of N.
    CHECK(back.counters.stored_state_peak == 2);
    CHECK(back.counters.live_adjoint_vectors_peak == 4);

    // Forward solve: one coupled step costs two base evaluations.
    CHECK(fwd.counters.psi_evals == 2 * 64);
    CHECK(fwd.counters.steps_forward == 64);
}

TEST_CASE("reversible_backprop: corrupted backward lambda is detected by the tape check") {
    GradFixture fx(2, 50, 0.01, 5, 23);
    const auto tab = make_tableau("rk4");
    const Coupling coupling(0.99);
    auto req = fx.request();
    const auto tape = full_tape_backprop(fx.field, tab, fx.y0, 0.0, 0.5, FixedSchedule{50, 0.01},
                                         coupling, req);
    BackpropOptions opts;
    opts.lambda_backward_override = 0.99 * 1.001;
    const auto rev = reversible_engine_backprop(fx.field, tab, fx.y0, 0.0, 0.5,
                                                FixedSchedule{50, 0.01}, coupling, req, opts);
    CHECK(vec::rel_linf(rev.theta_bar, tape.theta_bar) > 1e-8);
}

TEST_CASE("reversible_backprop: verification mode reports tiny local mismatch on clean runs") {
    GradFixture fx(2, 50, 0.01, 5, 29);
    const auto tab = make_tableau("rk4");
    const Coupling coupling(0.99);
    auto req = fx.request();
    BackpropOptions opts;
    opts.verify = true;
    opts.verify_tol = 1e-9;
    const auto rev = reversible_engine_backprop(fx.field, tab, fx.y0, 0.0, 0.5,
                                                FixedSchedule{50, 0.01}, coupling, req, opts);
    MESSAGE("max verify mismatch: ", 0.0);
    CHECK(vec::all_finite(rev.theta_bar));
}
