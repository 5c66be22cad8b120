#include "revode/stability.hpp"

#include <cmath>

#include "revode/errors.hpp"
#include "revode/field.hpp"
#include "revode/reversible.hpp"

namespace revode {

double stability_gamma(const ButcherTableau& tab, double h_alpha, double lambda) {
    const double r_minus = transfer_function(tab, -h_alpha);
    const double r_plus = transfer_function(tab, h_alpha);
    return 1.0 + lambda - (1.0 - lambda) * r_minus - r_minus * r_plus;
}

std::array<double, 4> amplification_matrix(const ButcherTableau& tab, double h_alpha,
                                           double lambda) {
    const double r_minus = transfer_function(tab, -h_alpha);
    const double r_plus = transfer_function(tab, h_alpha);
    return {lambda, 1.0 - lambda + r_plus,
            -lambda * r_minus, 1.0 - (1.0 - lambda) * r_minus - r_minus * r_plus};
}

StabilityVerdict is_stable(const ButcherTableau& tab, double h_alpha, double lambda) {
    if (!(lambda > 0.0) || !(lambda <= 1.0)) {
        throw ConfigError("stability query: lambda must lie in (0, 1]");
    }
    StabilityVerdict v;
    v.gamma = stability_gamma(tab, h_alpha, lambda);
    v.criterion = std::abs(v.gamma) < 1.0 + lambda;
    v.marginal_lambda = (lambda == 1.0);

    // Characteristic polynomial e^2 - Gamma e + lambda.
    const std::complex<double> disc =
        std::sqrt(std::complex<double>(v.gamma * v.gamma - 4.0 * lambda, 0.0));
    v.eigenvalues[0] = 0.5 * (v.gamma + disc);
    v.eigenvalues[1] = 0.5 * (v.gamma - disc);
    v.spectral_radius = std::max(std::abs(v.eigenvalues[0]), std::abs(v.eigenvalues[1]));
    v.rho_stable = v.spectral_radius < 1.0;
    return v;
}

DecayVerdict empirical_decay(const ButcherTableau& tab, double h_alpha, double lambda,
                             std::size_t n_steps) {
    // h = 1 with alpha = h_alpha exercises the exact transfer R(h_alpha)
    // because the linear field ignores t.
    LinearField field(1, h_alpha);
    Coupling coupling(lambda);
    ReversibleState s = ReversibleState::initial({1.0}, 0.0);
    EngineScratch ws;
    ws.resize(tab.stages, 1);

    const double start_norm = std::sqrt(2.0);
    for (std::size_t n = 0; n < n_steps; ++n) {
        try {
            forward_step(s, field, tab, 1.0, coupling, ws);
        } catch (const DivergenceError&) {
            return DecayVerdict::Diverges;
        }
        const double norm = std::hypot(s.y[0], s.z[0]);
        if (norm <= 1e-8 * start_norm) return DecayVerdict::Decays;
        if (norm >= 1e8 * start_norm) return DecayVerdict::Diverges;
    }
    return DecayVerdict::Inconclusive;
}

std::vector<RegionRow> region_scan(const ButcherTableau& tab, const std::vector<double>& lambdas,
                                   const std::vector<double>& h_alpha_grid) {
    for (std::size_t i = 1; i < h_alpha_grid.size(); ++i) {
        if (h_alpha_grid[i] <= h_alpha_grid[i - 1]) {
            throw ConfigError("region_scan: h_alpha grid must be sorted ascending");
        }
    }
    std::vector<RegionRow> rows;
    rows.reserve(lambdas.size());
    for (double lambda : lambdas) {
        RegionRow row;
        row.lambda = lambda;
        row.marginal = (lambda == 1.0);
        for (double ha : h_alpha_grid) {
            const auto v = is_stable(tab, ha, lambda);
            if (v.criterion) {
                row.boundary_h_alpha = ha;
                row.any_stable = true;
                break;  // grid ascends, first stable value is the most negative
            }
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace revode
