#include "revode/synthetic.hpp"

#include <cmath>
#include <cstring>

#include "revode/errors.hpp"
#include "revode/rk_step.hpp"

namespace revode {

// ---------------------------------------------------------------------------
// WhiteDwarfField

WhiteDwarfField::WhiteDwarfField(double C) : params_({{"C", {1}}}, Vec{C}) {
    if (!(C > 0.0) || !(C < 1.0)) throw ConfigError("white dwarf constant C must be in (0, 1)");
}

void WhiteDwarfField::set_params(Params p) {
    if (p.size() != 1) throw ConfigError("WhiteDwarfField expects one parameter");
    params_ = std::move(p);
}

void WhiteDwarfField::evaluate(double r, std::span<const double> y, std::span<double> out) const {
    if (!std::isfinite(r) || !vec::all_finite(y)) {
        throw DomainError("WhiteDwarfField::evaluate: non-finite input");
    }
    const double C = params_[0];
    const double u = y[0];
    const double w = y[1];
    const double clamped = std::max(u * u - C, 0.0);
    const double pressure = clamped * std::sqrt(clamped);  // (u^2 - C)^{3/2}
    out[0] = w;
    if (r > 0.0) {
        out[1] = -(2.0 / r) * w - pressure;
    } else {
        out[1] = -pressure / 3.0;
    }
}

void WhiteDwarfField::vjp(double r, std::span<const double> y, std::span<const double> v,
                          std::span<double> vjp_y, std::span<double> vjp_params,
                          double theta_scale) const {
    if (!vec::all_finite(v)) throw DomainError("WhiteDwarfField::vjp: non-finite cotangent");
    const double C = params_[0];
    const double u = y[0];
    const double clamped = std::max(u * u - C, 0.0);
    const double root = std::sqrt(clamped);
    // d(pressure)/du = 3 u sqrt(clamped); d(pressure)/dC = -(3/2) sqrt(clamped)
    double dw_du = -3.0 * u * root;
    double dw_dw;
    double dw_dC = 1.5 * root;
    if (r > 0.0) {
        dw_dw = -2.0 / r;
    } else {
        dw_du /= 3.0;
        dw_dC /= 3.0;
        dw_dw = 0.0;
    }
    vjp_y[0] = v[1] * dw_du;
    vjp_y[1] = v[0] + v[1] * dw_dw;
    vjp_params[0] += theta_scale * v[1] * dw_dC;
}

namespace {

// Integrates `field` with fixed-step RK4 and samples exactly at the grid
// times, splitting each segment into whole oracle steps plus a remainder.
Trajectory sample_on_grid(const VectorField& field, Vec y, std::pair<double, double> t_range,
                          std::size_t n_points, double oracle_h) {
    if (n_points < 2) throw ConfigError("need at least 2 sample points");
    const ButcherTableau rk4 = make_tableau("rk4");
    StepScratch ws;
    Vec incr(y.size());

    Trajectory traj;
    traj.dim = y.size();
    traj.times.resize(n_points);
    traj.values.resize(n_points * y.size());

    double t = t_range.first;
    const double span = t_range.second - t_range.first;
    traj.times[0] = t;
    std::copy(y.begin(), y.end(), traj.values.begin());
    for (std::size_t i = 1; i < n_points; ++i) {
        const double target =
            t_range.first + span * static_cast<double>(i) / static_cast<double>(n_points - 1);
        while (t < target - 1e-14) {
            const double h = std::min(oracle_h, target - t);
            rk_step(field, rk4, t, y, h, incr, {}, ws);
            for (std::size_t m = 0; m < y.size(); ++m) y[m] += incr[m];
            t += h;
        }
        t = target;
        traj.times[i] = target;
        std::copy(y.begin(), y.end(), traj.values.begin() + i * y.size());
    }
    return traj;
}

}  // namespace

Trajectory generate_white_dwarf(double C, std::pair<double, double> r_range, std::size_t n_points,
                                double oracle_h) {
    WhiteDwarfField field(C);
    return sample_on_grid(field, {1.0, 0.0}, r_range, n_points, oracle_h);
}

// ---------------------------------------------------------------------------
// CoupledOscillatorField

CoupledOscillatorField::CoupledOscillatorField(double k1, double k2, double k_couple,
                                               double damping)
    : params_(Params::zeros({})) {
    // State (x1, x2, v1, v2):
    //   x1' = v1, x2' = v2
    //   v1' = -(k1 + kc) x1 + kc x2 - damping v1
    //   v2' = kc x1 - (k2 + kc) x2 - damping v2
    std::memset(a_, 0, sizeof(a_));
    a_[0 * 4 + 2] = 1.0;
    a_[1 * 4 + 3] = 1.0;
    a_[2 * 4 + 0] = -(k1 + k_couple);
    a_[2 * 4 + 1] = k_couple;
    a_[2 * 4 + 2] = -damping;
    a_[3 * 4 + 0] = k_couple;
    a_[3 * 4 + 1] = -(k2 + k_couple);
    a_[3 * 4 + 3] = -damping;
}

void CoupledOscillatorField::set_params(Params p) {
    if (!p.empty()) throw ConfigError("CoupledOscillatorField has no parameters");
    params_ = std::move(p);
}

void CoupledOscillatorField::evaluate(double t, std::span<const double> y,
                                      std::span<double> out) const {
    if (!std::isfinite(t) || !vec::all_finite(y)) {
        throw DomainError("CoupledOscillatorField::evaluate: non-finite input");
    }
    for (std::size_t i = 0; i < 4; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < 4; ++j) acc += a_[i * 4 + j] * y[j];
        out[i] = acc;
    }
}

void CoupledOscillatorField::vjp(double, std::span<const double>, std::span<const double> v,
                                 std::span<double> vjp_y, std::span<double>, double) const {
    if (!vec::all_finite(v)) throw DomainError("CoupledOscillatorField::vjp: non-finite cotangent");
    for (std::size_t j = 0; j < 4; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < 4; ++i) acc += a_[i * 4 + j] * v[i];
        vjp_y[j] = acc;
    }
}

Trajectory generate_coupled_oscillator(std::pair<double, double> t_range, std::size_t n_points,
                                       double oracle_h) {
    CoupledOscillatorField field;
    return sample_on_grid(field, {1.0, -0.5, 0.0, 0.0}, t_range, n_points, oracle_h);
}

// ---------------------------------------------------------------------------
// DoublePendulumField

DoublePendulumField::DoublePendulumField() : params_(Params::zeros({})) {}

void DoublePendulumField::set_params(Params p) {
    if (!p.empty()) throw ConfigError("DoublePendulumField has no parameters");
    params_ = std::move(p);
}

void DoublePendulumField::evaluate(double t, std::span<const double> y,
                                   std::span<double> out) const {
    if (!std::isfinite(t) || !vec::all_finite(y)) {
        throw DomainError("DoublePendulumField::evaluate: non-finite input");
    }
    constexpr double g = 9.81;
    const double th1 = y[0], th2 = y[1], w1 = y[2], w2 = y[3];
    const double delta = th1 - th2;
    const double cd = std::cos(delta);
    const double sd = std::sin(delta);
    const double denom = 2.0 - cd * cd;  // 2 m - m cos^2(delta) with m = l = 1

    out[0] = w1;
    out[1] = w2;
    out[2] = (-g * (2.0 * std::sin(th1) - cd * std::sin(th2)) - sd * (w2 * w2 + w1 * w1 * cd)) /
             denom;
    out[3] = (sd * (2.0 * w1 * w1 + w2 * w2 * cd) + 2.0 * g * (cd * std::sin(th1) - std::sin(th2))) /
             denom;
}

void DoublePendulumField::vjp(double, std::span<const double>, std::span<const double>,
                              std::span<double>, std::span<double>, double) const {
    throw ConfigError("DoublePendulumField is a forward-only test fixture; no vjp");
}

}  // namespace revode
