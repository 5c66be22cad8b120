#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "revode/errors.hpp"
#include "revode/field.hpp"
#include "revode/rk_step.hpp"
#include "revode/rng.hpp"
#include "revode/stats.hpp"
#include "revode/tableau.hpp"
#include "test_helpers.hpp"

using namespace revode;

TEST_CASE("tableaux: published coefficients and structure") {
    const auto euler = make_tableau("euler");
    CHECK(euler.stages == 1);
    CHECK(euler.b == Vec{1.0});
    CHECK(euler.c == Vec{0.0});
    CHECK(euler.order == 1);

    const auto rk4 = make_tableau("rk4");
    CHECK(rk4.stages == 4);
    CHECK(rk4.b == Vec{1.0 / 6, 1.0 / 3, 1.0 / 3, 1.0 / 6});
    CHECK(rk4.c == Vec{0.0, 0.5, 0.5, 1.0});
    CHECK(rk4.order == 4);

    const auto bosh3 = make_tableau("bosh3");
    CHECK(bosh3.stages == 4);
    CHECK(bosh3.order == 3);
    CHECK(bosh3.embedded_order == 2);
    CHECK(bosh3.has_embedded());

    CHECK_THROWS_AS(make_tableau("dopri5"), ConfigError);
}

TEST_CASE("tableaux: validation catches broken invariants") {
    auto t = make_tableau("rk4");
    t.c[1] = 0.4;  // row-sum consistency broken
    CHECK_THROWS_AS(t.validate(), ConfigError);

    auto t2 = make_tableau("rk4");
    t2.a[1] = 0.5;  // upper-triangular entry
    CHECK_THROWS_AS(t2.validate(), ConfigError);

    auto t3 = make_tableau("rk4");
    t3.b[0] += 0.1;  // weights no longer sum to 1
    CHECK_THROWS_AS(t3.validate(), ConfigError);
}

TEST_CASE("order conditions: built-ins verify at their advertised order") {
    CHECK(check_order_conditions(make_tableau("euler")) == 1);
    CHECK(check_order_conditions(make_tableau("midpoint")) == 2);
    CHECK(check_order_conditions(make_tableau("ralston3")) == 3);
    CHECK(check_order_conditions(make_tableau("rk4")) == 4);
    const auto bosh3 = make_tableau("bosh3");
    CHECK(check_order_conditions(bosh3) == 3);
    CHECK(check_order_conditions(bosh3, bosh3.b_err) == 2);

    // A perturbed weight vector must lose its order.
    auto broken = make_tableau("rk4");
    broken.b = {1.0 / 6 + 0.01, 1.0 / 3 - 0.01, 1.0 / 3, 1.0 / 6};
    CHECK(check_order_conditions(broken) < 4);
}

TEST_CASE("step: euler on the linear field") {
    LinearField f(1, -1.0);
    const auto out = step(f, make_tableau("euler"), 0.0, {1.0}, 0.1);
    CHECK(out.increment[0] == doctest::Approx(-0.1).epsilon(1e-15));
}

TEST_CASE("step: zero field gives zero increment for every tableau") {
    MlpField f(2, 4, MlpField::zero_params(2, 4));
    for (const auto& name : tableau_names()) {
        const auto out = step(f, make_tableau(name), 0.3, {1.0, -2.0}, 0.05);
        CHECK(out.increment == Vec{0.0, 0.0});
    }
}

TEST_CASE("step: rk4 on the linear field matches the polynomial oracle") {
    LinearField f(1, -1.0);
    const auto out = step(f, make_tableau("rk4"), 0.0, {1.0}, 0.1);
    // Oracle: z + z^2/2 + z^3/6 + z^4/24 at z = -0.1 by Horner evaluation.
    const double expected = test::horner(test::stability_poly("rk4"), -0.1);
    CHECK(expected == doctest::Approx(-0.0951625).epsilon(1e-12));
    CHECK(out.increment[0] == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("step: embedded error estimate only where embedded weights exist") {
    LinearField f(1, -1.0);
    const auto out = step(f, make_tableau("bosh3"), 0.0, {1.0}, 0.1, true);
    REQUIRE(out.error.has_value());
    // On the linear field the estimate is R(z) - R_err(z); the embedded
    // polynomial is z + z^2/2 + (3/16) z^3 + (1/48) z^4.
    const double z = -0.1;
    const double r_err = z + 0.5 * z * z + (3.0 / 16.0) * z * z * z + (1.0 / 48.0) * z * z * z * z;
    CHECK((*out.error)[0] ==
          doctest::Approx(test::horner(test::stability_poly("bosh3"), z) - r_err).epsilon(1e-12));
    CHECK_THROWS_AS(step(f, make_tableau("rk4"), 0.0, {1.0}, 0.1, true), ConfigError);
}

TEST_CASE("step: non-finite stages raise DivergenceError") {
    LinearField f(1, 1e308);
    CHECK_THROWS_AS((void)step(f, make_tableau("rk4"), 0.0, {1e10}, 1.0), DivergenceError);
}

TEST_CASE("transfer function: euler is the identity polynomial") {
    const auto euler = make_tableau("euler");
    for (double z : {-2.0, -0.5, 0.0, 0.3, 1.7}) {
        CHECK(transfer_function(euler, z) == doctest::Approx(z).epsilon(1e-15));
    }
}

TEST_CASE("transfer function: zero step maps to zero for every tableau") {
    for (const auto& name : tableau_names()) {
        CHECK(transfer_function(make_tableau(name), 0.0) == 0.0);
    }
}

TEST_CASE("transfer function: matches the published stability polynomials") {
    Rng rng(31);
    for (const auto& name : tableau_names()) {
        const auto tab = make_tableau(name);
        const auto poly = test::stability_poly(name);
        for (int i = 0; i < 20; ++i) {
            const double z = rng.uniform(-3.0, 1.0);
            CHECK(transfer_function(tab, z) ==
                  doctest::Approx(test::horner(poly, z)).epsilon(1e-13));
        }
    }
}

TEST_CASE("transfer function: rk4 value pinned and consistent with step") {
    const auto rk4 = make_tableau("rk4");
    CHECK(transfer_function(rk4, -0.1) == doctest::Approx(-0.0951625).epsilon(1e-14));
    LinearField f(1, -1.0);
    const auto out = step(f, rk4, 0.0, {1.0}, 0.1);
    CHECK(std::abs(transfer_function(rk4, -0.1) - out.increment[0]) < 1e-14);
}

TEST_CASE("property: step on the linear field equals R(h alpha) * y") {
    Rng rng(404);
    for (const auto& name : tableau_names()) {
        const auto tab = make_tableau(name);
        for (int trial = 0; trial < 50; ++trial) {
            const double h = rng.uniform(1e-4, 0.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
            const double alpha = rng.uniform(-3.0, 3.0);
            const double y = rng.uniform(-2.0, 2.0);
            LinearField f(1, alpha);
            const auto out = step(f, tab, 0.0, {y}, h);
            const double expected = transfer_function(tab, h * alpha) * y;
            CHECK(std::abs(out.increment[0] - expected) <=
                  1e-13 * std::max(1.0, std::abs(expected)));
        }
    }
}

TEST_CASE("property: one-step local error has order k+1 on dy/dt = -y") {
    LinearField f(1, -1.0);
    for (const auto& name : tableau_names()) {
        const auto tab = make_tableau(name);
        std::vector<double> hs, errs;
        for (int p = 4; p <= 10; ++p) {
            const double h = std::pow(2.0, -p);
            const auto out = step(f, tab, 0.0, {1.0}, h);
            // expm1 keeps the subtraction at the h scale instead of 1;
            // points under the float64 noise floor are excluded from the fit.
            const double err = std::abs(out.increment[0] - std::expm1(-h));
            if (err > 1e-13) {
                hs.push_back(h);
                errs.push_back(err);
            }
        }
        REQUIRE(hs.size() >= 3);
        const double slope = fit_loglog_slope(hs, errs);
        MESSAGE(name, " one-step error slope over ", hs.size(), " points: ", slope);
        CHECK(std::abs(slope - (tab.order + 1)) < 0.25);
    }
}

TEST_CASE("property: step map is Lipschitz with constant proportional to h") {
    MlpField f(3, 10, MlpField::random_params(3, 10, 77));
    Rng rng(78);
    double worst_c = 0.0;
    const auto tab = make_tableau("rk4");
    for (int trial = 0; trial < 200; ++trial) {
        const double h = rng.uniform(1e-4, 0.2);
        Vec x(3), xp(3);
        for (int i = 0; i < 3; ++i) {
            x[i] = rng.uniform(-1.5, 1.5);
            xp[i] = x[i] + rng.uniform(-0.1, 0.1);
        }
        const auto a = step(f, tab, 0.0, x, h);
        const auto b = step(f, tab, 0.0, xp, h);
        Vec diff_psi(3), diff_x(3);
        for (int i = 0; i < 3; ++i) {
            diff_psi[i] = a.increment[i] - b.increment[i];
            diff_x[i] = x[i] - xp[i];
        }
        const double dx = vec::norm2(diff_x);
        if (dx > 1e-12) worst_c = std::max(worst_c, vec::norm2(diff_psi) / (h * dx));
    }
    MESSAGE("empirical C with ||Psi_h(x)-Psi_h(x')|| <= C h ||x-x'||: ", worst_c);
    CHECK(std::isfinite(worst_c));
    CHECK(worst_c > 0.0);
}

TEST_CASE("step_vjp: zero cotangent and single-stage chain rule") {
    MlpField f(2, 6, MlpField::random_params(2, 6, 5));
    const auto euler = make_tableau("euler");
    const Vec y = {0.4, -0.2};

    const auto [zy, zp] = step_vjp(f, euler, 0.1, y, 0.05, {0.0, 0.0});
    for (double v : zy) CHECK(v == 0.0);
    for (double v : zp) CHECK(v == 0.0);

    // Single stage: v . dPsi/dy = h (v . df/dy at (t, y)), same for theta.
    const Vec v = {1.3, -0.7};
    const double h = 0.05;
    const auto [psi_y, psi_p] = step_vjp(f, euler, 0.1, y, h, v);
    const auto [f_y, f_p] = f.vjp(0.1, y, v);
    for (int i = 0; i < 2; ++i) CHECK(psi_y[i] == doctest::Approx(h * f_y[i]).epsilon(1e-14));
    for (std::size_t i = 0; i < f_p.size(); ++i) {
        CHECK(psi_p[i] == doctest::Approx(h * f_p[i]).epsilon(1e-14));
    }
}

TEST_CASE("step_vjp: agrees with finite differences for all tableaux") {
    Rng rng(300);
    for (const auto& name : tableau_names()) {
        const auto tab = make_tableau(name);
        MlpField f(2, 8, MlpField::random_params(2, 8, 1000 + tab.stages));
        const double t = 0.2;
        double h = rng.uniform(0.02, 0.1);
        if (rng.uniform() < 0.5) h = -h;  // both signs are used by the coupled scheme
        Vec y = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        Vec v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};

        const auto [vy, vp] = step_vjp(f, tab, t, y, h, v);
        const Vec fd_p =
            test::fd_wrt_params(f, [&] { return vec::dot(v, step(f, tab, t, y, h).increment); });
        const Vec fd_y = test::fd_wrt_state(
            y, [&](const Vec& yy) { return vec::dot(v, step(f, tab, t, yy, h).increment); });
        CHECK(vec::rel_linf(vp, fd_p) < 1e-5);
        CHECK(vec::rel_linf(vy, fd_y) < 1e-5);
    }
}

TEST_CASE("tableau json: structure") {
    const auto j = tableau_to_json(make_tableau("bosh3"));
    CHECK(j["name"] == "bosh3");
    CHECK(j["stages"] == 4);
    CHECK(j["b_err"].size() == 4);
    CHECK(j["embedded_order"] == 2);
}
