#pragma once

#include <cmath>
#include <span>

namespace revode {

// Least-squares slope of y against x.
inline double fit_slope(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Slope of log(err) vs log(h): the empirical convergence order.
inline double fit_loglog_slope(std::span<const double> h, std::span<const double> err) {
    double lx[64], ly[64];
    const std::size_t n = h.size();
    for (std::size_t i = 0; i < n; ++i) {
        lx[i] = std::log(h[i]);
        ly[i] = std::log(err[i]);
    }
    return fit_slope({lx, n}, {ly, n});
}

}  // namespace revode
