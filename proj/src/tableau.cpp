#include "revode/tableau.hpp"

#include <cmath>

#include "revode/errors.hpp"

namespace revode {

void ButcherTableau::validate() const {
    const std::size_t s = stages;
    if (s == 0 || a.size() != s * s || b.size() != s || c.size() != s) {
        throw ConfigError("tableau '" + name + "': inconsistent dimensions");
    }
    if (!b_err.empty() && b_err.size() != s) {
        throw ConfigError("tableau '" + name + "': embedded weights have wrong length");
    }
    for (std::size_t i = 0; i < s; ++i) {
        for (std::size_t j = i; j < s; ++j) {
            if (a_at(i, j) != 0.0) {
                throw ConfigError("tableau '" + name + "': not strictly lower triangular");
            }
        }
        double row = 0.0;
        for (std::size_t j = 0; j < i; ++j) row += a_at(i, j);
        if (std::abs(row - c[i]) > 1e-14) {
            throw ConfigError("tableau '" + name + "': row sum of A differs from c");
        }
    }
    double bsum = 0.0;
    for (double w : b) bsum += w;
    if (std::abs(bsum - 1.0) > 1e-14) {
        throw ConfigError("tableau '" + name + "': weights do not sum to 1");
    }
}

ButcherTableau make_tableau(std::string_view name) {
    ButcherTableau t;
    t.name = name;
    if (name == "euler") {
        t.stages = 1;
        t.a = {0.0};
        t.b = {1.0};
        t.c = {0.0};
        t.order = 1;
    } else if (name == "midpoint") {
        t.stages = 2;
        t.a = {0.0, 0.0,
               0.5, 0.0};
        t.b = {0.0, 1.0};
        t.c = {0.0, 0.5};
        t.order = 2;
    } else if (name == "ralston3") {
        // Ralston's minimal-error-bound 3-stage method.
        t.stages = 3;
        t.a = {0.0,       0.0,  0.0,
               0.5,       0.0,  0.0,
               0.0,       0.75, 0.0};
        t.b = {2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0};
        t.c = {0.0, 0.5, 0.75};
        t.order = 3;
    } else if (name == "rk4") {
        t.stages = 4;
        t.a = {0.0, 0.0, 0.0, 0.0,
               0.5, 0.0, 0.0, 0.0,
               0.0, 0.5, 0.0, 0.0,
               0.0, 0.0, 1.0, 0.0};
        t.b = {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0};
        t.c = {0.0, 0.5, 0.5, 1.0};
        t.order = 4;
    } else if (name == "bosh3") {
        // Bogacki-Shampine 3(2), FSAL form. The first-same-as-last stage is
        // recomputed each step: caching it across steps would conflict with
        // the reversible engine's recompute-on-demand backward pass.
        t.stages = 4;
        t.a = {0.0,       0.0,       0.0,       0.0,
               0.5,       0.0,       0.0,       0.0,
               0.0,       0.75,      0.0,       0.0,
               2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0, 0.0};
        t.b = {2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0, 0.0};
        t.c = {0.0, 0.5, 0.75, 1.0};
        t.b_err = {7.0 / 24.0, 0.25, 1.0 / 3.0, 0.125};
        t.order = 3;
        t.embedded_order = 2;
    } else {
        throw ConfigError("unknown tableau '" + std::string(name) +
                          "' (expected euler|midpoint|ralston3|rk4|bosh3)");
    }
    t.validate();
    return t;
}

const std::vector<std::string>& tableau_names() {
    static const std::vector<std::string> names = {"euler", "midpoint", "ralston3", "rk4", "bosh3"};
    return names;
}

int check_order_conditions(const ButcherTableau& tab, std::span<const double> weights) {
    const std::size_t s = tab.stages;
    std::span<const double> b = weights.empty() ? std::span<const double>(tab.b) : weights;
    const auto& c = tab.c;
    constexpr double tol = 1e-12;

    auto ac = [&](std::size_t i) {  // (A c)_i
        double v = 0.0;
        for (std::size_t j = 0; j < i; ++j) v += tab.a_at(i, j) * c[j];
        return v;
    };

    double s1 = 0.0;                     // sum b_i               = 1
    double s2 = 0.0;                     // sum b_i c_i           = 1/2
    double s3a = 0.0, s3b = 0.0;         // b c^2 = 1/3, b A c = 1/6
    double s4a = 0.0, s4b = 0.0;         // b c^3 = 1/4, b c A c = 1/8
    double s4c = 0.0, s4d = 0.0;         // b A c^2 = 1/12, b A A c = 1/24
    for (std::size_t i = 0; i < s; ++i) {
        const double bi = b[i];
        s1 += bi;
        s2 += bi * c[i];
        s3a += bi * c[i] * c[i];
        s3b += bi * ac(i);
        s4a += bi * c[i] * c[i] * c[i];
        s4b += bi * c[i] * ac(i);
        double ac2 = 0.0, aac = 0.0;
        for (std::size_t j = 0; j < i; ++j) {
            ac2 += tab.a_at(i, j) * c[j] * c[j];
            aac += tab.a_at(i, j) * ac(j);
        }
        s4c += bi * ac2;
        s4d += bi * aac;
    }

    if (std::abs(s1 - 1.0) > tol) return 0;
    if (std::abs(s2 - 0.5) > tol) return 1;
    if (std::abs(s3a - 1.0 / 3.0) > tol || std::abs(s3b - 1.0 / 6.0) > tol) return 2;
    if (std::abs(s4a - 0.25) > tol || std::abs(s4b - 0.125) > tol ||
        std::abs(s4c - 1.0 / 12.0) > tol || std::abs(s4d - 1.0 / 24.0) > tol) {
        return 3;
    }
    return 4;
}

nlohmann::json tableau_to_json(const ButcherTableau& tab) {
    nlohmann::json j;
    j["name"] = tab.name;
    j["stages"] = tab.stages;
    j["order"] = tab.order;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < tab.stages; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t k = 0; k < tab.stages; ++k) row.push_back(tab.a_at(i, k));
        rows.push_back(row);
    }
    j["a"] = rows;
    j["b"] = tab.b;
    j["c"] = tab.c;
    if (tab.has_embedded()) {
        j["b_err"] = tab.b_err;
        j["embedded_order"] = tab.embedded_order;
    }
    return j;
}

}  // namespace revode
