#pragma once

#include <array>
#include <complex>
#include <vector>

#include "revode/tableau.hpp"

namespace revode {

// trace of the 2x2 amplification matrix of the coupled scheme on the linear
// test problem: Gamma = 1 + lambda - (1 - lambda) R(-ha) - R(-ha) R(ha).
double stability_gamma(const ButcherTableau& tab, double h_alpha, double lambda);

// T such that (y_{n+1}, z_{n+1})^T = T (y_n, z_n)^T, row-major:
//   [ lambda                 1 - lambda + R(ha)              ]
//   [ -lambda R(-ha)         1 - (1 - lambda) R(-ha) - R(-ha) R(ha) ]
// with trace(T) = Gamma and det(T) = lambda.
std::array<double, 4> amplification_matrix(const ButcherTableau& tab, double h_alpha,
                                           double lambda);

struct StabilityVerdict {
    double gamma = 0.0;
    bool criterion = false;  // |Gamma| < 1 + lambda
    std::array<std::complex<double>, 2> eigenvalues{};
    double spectral_radius = 0.0;
    bool rho_stable = false;       // spectral_radius < 1
    bool marginal_lambda = false;  // lambda == 1: criterion derivation degenerates
};

StabilityVerdict is_stable(const ButcherTableau& tab, double h_alpha, double lambda);

enum class DecayVerdict { Decays, Diverges, Inconclusive };

// Runs the actual coupled scheme on dy/dt = alpha y from y0 = z0 = 1 and
// watches whether ||(y, z)|| crosses 1e-8 (decay) or 1e8 (divergence).
DecayVerdict empirical_decay(const ButcherTableau& tab, double h_alpha, double lambda,
                             std::size_t n_steps = 10000);

struct RegionRow {
    double lambda = 0.0;
    double boundary_h_alpha = 0.0;  // most negative stable grid value; 0 if none
    bool any_stable = false;
    bool marginal = false;
};

// Per lambda, the most negative h*alpha on the grid with a stable verdict.
std::vector<RegionRow> region_scan(const ButcherTableau& tab, const std::vector<double>& lambdas,
                                   const std::vector<double>& h_alpha_grid);

}  // namespace revode
