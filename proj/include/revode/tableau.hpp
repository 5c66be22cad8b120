#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace revode {

// Explicit Runge-Kutta coefficients. A is stored row-major and must be
// strictly lower triangular; b_err, when present, carries the embedded
// lower-order weights used for local error estimates.
struct ButcherTableau {
    std::string name;
    std::size_t stages = 0;
    std::vector<double> a;      // stages x stages, row-major
    std::vector<double> b;
    std::vector<double> c;
    std::vector<double> b_err;  // empty when no embedded method
    int order = 0;
    int embedded_order = 0;     // 0 when no embedded method

    bool has_embedded() const { return !b_err.empty(); }
    double a_at(std::size_t i, std::size_t j) const { return a[i * stages + j]; }

    // Throws ConfigError if explicitness, row-sum consistency or sum(b)=1
    // are violated.
    void validate() const;
};

// Standard published coefficients for euler, midpoint, ralston3, rk4, bosh3.
ButcherTableau make_tableau(std::string_view name);

const std::vector<std::string>& tableau_names();

// Largest k <= 4 for which all rooted-tree order conditions up to k hold to
// 1e-12. `weights` defaults to tab.b; pass tab.b_err to check the embedded
// method.
int check_order_conditions(const ButcherTableau& tab, std::span<const double> weights = {});

// Linear test problem transfer function R(z) = z b^T (I - zA)^{-1} 1,
// computed by forward substitution. For explicit tableaux this is a
// polynomial of degree <= stages, so no division ever occurs.
template <typename Scalar>
Scalar transfer_function(const ButcherTableau& tab, Scalar z) {
    const std::size_t s = tab.stages;
    Scalar g[16];  // (I - zA)^{-1} 1, stage count is small
    Scalar acc{};
    for (std::size_t i = 0; i < s; ++i) {
        Scalar gi{1.0};
        for (std::size_t j = 0; j < i; ++j) gi += z * tab.a_at(i, j) * g[j];
        g[i] = gi;
        acc += tab.b[i] * gi;
    }
    return z * acc;
}

nlohmann::json tableau_to_json(const ButcherTableau& tab);

}  // namespace revode
