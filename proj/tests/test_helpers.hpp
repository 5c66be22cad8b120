#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "revode/field.hpp"
#include "revode/params.hpp"
#include "revode/vec.hpp"

namespace revode::test {

// ---------------------------------------------------------------------------
// Independent oracles. These stay deliberately separate from the library
// implementation paths they check.

// Horner evaluation of sum_j coeffs[j] z^j.
inline double horner(std::span<const double> coeffs, double z) {
    double acc = 0.0;
    for (std::size_t j = coeffs.size(); j-- > 0;) acc = acc * z + coeffs[j];
    return acc;
}

// Published stability polynomials of the built-in methods (constant term
// first). The library computes R(z) by forward substitution instead.
inline std::vector<double> stability_poly(const std::string& name) {
    if (name == "euler") return {0.0, 1.0};
    if (name == "midpoint") return {0.0, 1.0, 0.5};
    if (name == "ralston3") return {0.0, 1.0, 0.5, 1.0 / 6.0};
    if (name == "rk4") return {0.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0};
    if (name == "bosh3") return {0.0, 1.0, 0.5, 1.0 / 6.0, 0.0};
    throw std::runtime_error("no oracle polynomial for " + name);
}

// Central finite difference of a scalar function of the field parameters.
inline Vec fd_wrt_params(VectorField& field, const std::function<double()>& scalar_fn,
                         double eps = 1e-6) {
    const Params base = field.params();
    Vec grad(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        Params p = base;
        p[i] = base[i] + eps;
        field.set_params(p);
        const double fp = scalar_fn();
        p[i] = base[i] - eps;
        field.set_params(p);
        const double fm = scalar_fn();
        grad[i] = (fp - fm) / (2.0 * eps);
    }
    field.set_params(base);
    return grad;
}

// Central finite difference of a scalar function of a state vector.
inline Vec fd_wrt_state(Vec y, const std::function<double(const Vec&)>& scalar_fn,
                        double eps = 1e-6) {
    Vec grad(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double saved = y[i];
        y[i] = saved + eps;
        const double fp = scalar_fn(y);
        y[i] = saved - eps;
        const double fm = scalar_fn(y);
        y[i] = saved;
        grad[i] = (fp - fm) / (2.0 * eps);
    }
    return grad;
}

}  // namespace revode::test
