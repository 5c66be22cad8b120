#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include "revode/errors.hpp"
#include "revode/field.hpp"
#include "revode/rng.hpp"
#include "revode/synthetic.hpp"
#include "test_helpers.hpp"

using namespace revode;

TEST_CASE("params: shape bookkeeping and views") {
    Params p({{"W", {2, 3}}, {"b", {2}}}, Vec{1, 2, 3, 4, 5, 6, 7, 8});
    CHECK(p.size() == 8);
    CHECK(p.view("W").size() == 6);
    CHECK(p.view("b")[0] == 7.0);
    CHECK_THROWS_AS(p.view("missing"), ConfigError);
    CHECK_THROWS_AS(Params({{"W", {2, 3}}}, Vec{1, 2}), ConfigError);
}

TEST_CASE("params: binary round trip is bit exact") {
    Rng rng(7);
    std::vector<TensorSpec> shape = {{"W1", {10, 3}}, {"b1", {10}}};
    Params p = Params::zeros(shape);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = rng.uniform(-5.0, 5.0);
    p[0] = 0.1 + 0.2;  // a value with a non-terminating binary expansion

    const std::string prefix = (std::filesystem::temp_directory_path() / "revode_params").string();
    p.save(prefix);
    const Params q = Params::load(prefix);
    REQUIRE(q.size() == p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(std::memcmp(&q.values()[i], &p.values()[i], 8) == 0);
    }
    CHECK(q.shape()[0].name == "W1");
    CHECK(q.shape()[0].dims == std::vector<std::size_t>{10, 3});
}

TEST_CASE("linear field: evaluate and vjp") {
    LinearField f(1, -1.0);
    CHECK(f.evaluate(0.0, {2.0})[0] == doctest::Approx(-2.0).epsilon(1e-15));

    // v . df/dy = alpha v, v . df/dalpha = v . y
    const auto [vy, vp] = f.vjp(0.3, Vec{0.7}, Vec{2.0});
    CHECK(vy[0] == doctest::Approx(-2.0).epsilon(1e-15));
    CHECK(vp[0] == doctest::Approx(1.4).epsilon(1e-15));
}

TEST_CASE("mlp field: zero parameters give the zero field") {
    MlpField f(3, 10, MlpField::zero_params(3, 10));
    const Vec out = f.evaluate(0.7, {1.0, -2.0, 0.5});
    for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("mlp field: one-neuron composition matches the scalar oracle") {
    // W1 = [[0, 1]] reads only y, identity second layer: f = tanh(y).
    Params p = MlpField::zero_params(1, 1);
    p.view("W1")[1] = 1.0;
    p.view("W2")[0] = 1.0;
    MlpField f(1, 1, std::move(p));
    const double got = f.evaluate(0.0, {0.5})[0];
    CHECK(got == doctest::Approx(0.46211715726).epsilon(1e-10));
    CHECK(got == doctest::Approx(std::tanh(0.5)).epsilon(1e-15));
}

TEST_CASE("fields: non-finite inputs raise DomainError") {
    MlpField f(2, 4, MlpField::random_params(2, 4, 1));
    CHECK_THROWS_AS((void)f.evaluate(0.0, Vec{1.0, std::nan("")}), DomainError);
    Vec vy(2), vp(f.param_count());
    CHECK_THROWS_AS(
        f.vjp(0.0, Vec{1.0, 1.0}, Vec{std::numeric_limits<double>::infinity(), 0.0}, vy, vp, 1.0),
        DomainError);
}

TEST_CASE("vjp: zero cotangent gives zero pullbacks") {
    MlpField f(2, 5, MlpField::random_params(2, 5, 3));
    const auto [vy, vp] = f.vjp(0.2, Vec{0.4, -0.6}, Vec{0.0, 0.0});
    for (double v : vy) CHECK(v == 0.0);
    for (double v : vp) CHECK(v == 0.0);
}

TEST_CASE("vjp: linear in the cotangent") {
    MlpField f(3, 6, MlpField::random_params(3, 6, 11));
    Rng rng(99);
    const Vec y = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Vec v1 = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Vec v2 = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double a = 1.7, b = -0.3;
    Vec combo(3);
    for (int i = 0; i < 3; ++i) combo[i] = a * v1[i] + b * v2[i];

    const auto [gy1, gp1] = f.vjp(0.1, y, v1);
    const auto [gy2, gp2] = f.vjp(0.1, y, v2);
    const auto [gyc, gpc] = f.vjp(0.1, y, combo);
    for (int i = 0; i < 3; ++i) {
        CHECK(gyc[i] == doctest::Approx(a * gy1[i] + b * gy2[i]).epsilon(1e-12));
    }
    for (std::size_t i = 0; i < gp1.size(); ++i) {
        CHECK(gpc[i] == doctest::Approx(a * gp1[i] + b * gp2[i]).epsilon(1e-12));
    }
}

TEST_CASE("vjp: determinism is bit exact") {
    MlpField f(2, 8, MlpField::random_params(2, 8, 17));
    const Vec y = {0.3, -0.8};
    const Vec v = {1.1, 0.2};
    const auto r1 = f.vjp(0.4, y, v);
    const auto r2 = f.vjp(0.4, y, v);
    CHECK(r1.first == r2.first);
    CHECK(r1.second == r2.second);
    CHECK(f.evaluate(0.4, y) == f.evaluate(0.4, y));
}

TEST_CASE("vjp agrees with central finite differences over random mlps") {
    Rng meta(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 1 + (meta.next_u64() % 4);
        MlpField f(d, 10, MlpField::random_params(d, 10, meta.next_u64()));
        Rng rng(meta.next_u64());
        const double t = rng.uniform(-1, 1);
        Vec y(d), v(d);
        for (auto& x : y) x = rng.uniform(-1, 1);
        for (auto& x : v) x = rng.uniform(-1, 1);

        const auto [vy, vp] = f.vjp(t, y, v);

        // Oracle: d/dtheta and d/dy of dot(v, f(t, y)).
        const Vec fd_p = test::fd_wrt_params(f, [&] { return vec::dot(v, f.evaluate(t, y)); });
        const Vec fd_y =
            test::fd_wrt_state(y, [&](const Vec& yy) { return vec::dot(v, f.evaluate(t, yy)); });

        worst = std::max(worst, vec::rel_linf(vp, fd_p));
        worst = std::max(worst, vec::rel_linf(vy, fd_y));
    }
    MESSAGE("max rel Linf deviation vjp vs finite differences: ", worst);
    CHECK(worst < 1e-5);
}

TEST_CASE("white dwarf field: origin limit and clamp") {
    WhiteDwarfField f(0.2);
    // At r = 0 with u = 1, w = 0 the regularized limit applies.
    const Vec at0 = f.evaluate(0.0, {1.0, 0.0});
    CHECK(at0[0] == 0.0);
    CHECK(at0[1] == doctest::Approx(-std::pow(0.8, 1.5) / 3.0).epsilon(1e-14));

    // u^2 == C exactly: pressure term vanishes, w' = -(2/r) w.
    const double u = std::sqrt(0.2);
    const Vec mid = f.evaluate(2.0, {u, -0.3});
    CHECK(mid[1] == doctest::Approx(-(2.0 / 2.0) * -0.3).epsilon(1e-14));

    // u^2 < C: clamp keeps the power-law term at zero.
    const Vec below = f.evaluate(2.0, {0.1, -0.3});
    CHECK(below[1] == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("white dwarf field: vjp matches finite differences away from the clamp") {
    WhiteDwarfField f(0.001);
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const double r = rng.uniform(0.5, 4.0);
        const Vec y = {rng.uniform(0.4, 1.0), rng.uniform(-0.5, 0.0)};
        const Vec v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const auto [vy, vp] = f.vjp(r, y, v);
        const Vec fd_y =
            test::fd_wrt_state(y, [&](const Vec& yy) { return vec::dot(v, f.evaluate(r, yy)); });
        const Vec fd_p = test::fd_wrt_params(f, [&] { return vec::dot(v, f.evaluate(r, y)); });
        CHECK(vec::rel_linf(vy, fd_y) < 1e-7);
        CHECK(vec::rel_linf(vp, fd_p) < 1e-6);
    }
}

TEST_CASE("mlp parameter initialization is reproducible and fan-in bounded") {
    const Params a = MlpField::random_params(2, 10, 42);
    const Params b = MlpField::random_params(2, 10, 42);
    CHECK(a.values() == b.values());
    const Params c = MlpField::random_params(2, 10, 43);
    CHECK(a.values() != c.values());
    const double bound1 = 1.0 / std::sqrt(3.0);
    for (double w : a.view("W1")) CHECK(std::abs(w) <= bound1);
    const double bound2 = 1.0 / std::sqrt(10.0);
    for (double w : a.view("W2")) CHECK(std::abs(w) <= bound2);
}
