#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace revode {

using Vec = std::vector<double>;

namespace vec {

inline void fill(std::span<double> x, double value) {
    for (double& v : x) v = value;
}

// y += a * x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

// y = a * y
inline void scale(std::span<double> y, double a) {
    for (double& v : y) v *= a;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

inline bool all_finite(std::span<const double> a) {
    for (double v : a) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

inline double rel_linf(std::span<const double> a, std::span<const double> b) {
    double diff = 0.0;
    double ref = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        ref = std::max(ref, std::abs(b[i]));
    }
    return diff / std::max(ref, 1e-300);
}

}  // namespace vec
}  // namespace revode
