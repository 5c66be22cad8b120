#include "revode/field.hpp"

#include <cmath>

#include "revode/errors.hpp"
#include "revode/rng.hpp"

namespace revode {

namespace {

void check_finite_input(double t, std::span<const double> y, std::string_view what) {
    if (!std::isfinite(t) || !vec::all_finite(y)) {
        throw DomainError(std::string(what) + ": non-finite input (upstream divergence?)");
    }
}

}  // namespace

Vec VectorField::evaluate(double t, const Vec& y) const {
    Vec out(dim());
    evaluate(t, y, out);
    return out;
}

std::pair<Vec, Vec> VectorField::vjp(double t, const Vec& y, const Vec& v) const {
    Vec vy(dim(), 0.0);
    Vec vp(param_count(), 0.0);
    vjp(t, y, v, vy, vp, 1.0);
    return {std::move(vy), std::move(vp)};
}

// ---------------------------------------------------------------------------
// LinearField

LinearField::LinearField(std::size_t dim, double alpha)
    : dim_(dim), params_({{"alpha", {1}}}, Vec{alpha}) {}

void LinearField::set_params(Params p) {
    if (p.size() != 1) throw ConfigError("LinearField expects exactly one parameter");
    params_ = std::move(p);
}

void LinearField::evaluate(double t, std::span<const double> y, std::span<double> out) const {
    check_finite_input(t, y, "LinearField::evaluate");
    const double a = params_[0];
    for (std::size_t i = 0; i < dim_; ++i) out[i] = a * y[i];
}

void LinearField::vjp(double t, std::span<const double> y, std::span<const double> v,
                      std::span<double> vjp_y, std::span<double> vjp_params,
                      double theta_scale) const {
    check_finite_input(t, y, "LinearField::vjp");
    if (!vec::all_finite(v)) throw DomainError("LinearField::vjp: non-finite cotangent");
    const double a = params_[0];
    for (std::size_t i = 0; i < dim_; ++i) vjp_y[i] = a * v[i];
    vjp_params[0] += theta_scale * vec::dot(v, y);
}

// ---------------------------------------------------------------------------
// MlpField

namespace {

std::vector<TensorSpec> mlp_shape(std::size_t d, std::size_t hidden) {
    const std::size_t in = d + 1;  // [t; y]
    return {{"W1", {hidden, in}}, {"b1", {hidden}}, {"W2", {d, hidden}}, {"b2", {d}}};
}

}  // namespace

MlpField::MlpField(std::size_t state_dim, std::size_t hidden, Params p)
    : dim_(state_dim), hidden_(hidden), params_(std::move(p)) {
    if (hidden_ == 0 || hidden_ > 64) {
        throw ConfigError("MlpField: hidden size must be in [1, 64]");
    }
    const std::size_t want = hidden * (state_dim + 1) + hidden + state_dim * hidden + state_dim;
    if (params_.size() != want) {
        throw ConfigError("MlpField: parameter vector has " + std::to_string(params_.size()) +
                          " entries, expected " + std::to_string(want));
    }
}

Params MlpField::zero_params(std::size_t state_dim, std::size_t hidden) {
    return Params::zeros(mlp_shape(state_dim, hidden));
}

Params MlpField::random_params(std::size_t state_dim, std::size_t hidden, std::uint64_t seed) {
    Params p = Params::zeros(mlp_shape(state_dim, hidden));
    Rng rng(seed);
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(state_dim + 1));
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (double& w : p.view("W1")) w = rng.uniform(-bound1, bound1);
    for (double& w : p.view("b1")) w = rng.uniform(-bound1, bound1);
    for (double& w : p.view("W2")) w = rng.uniform(-bound2, bound2);
    for (double& w : p.view("b2")) w = rng.uniform(-bound2, bound2);
    return p;
}

void MlpField::set_params(Params p) {
    if (p.size() != params_.size()) throw ConfigError("MlpField::set_params: size mismatch");
    params_ = std::move(p);
}

void MlpField::evaluate(double t, std::span<const double> y, std::span<double> out) const {
    check_finite_input(t, y, "MlpField::evaluate");
    const std::size_t in = dim_ + 1;
    auto w1 = params_.view("W1");
    auto b1 = params_.view("b1");
    auto w2 = params_.view("W2");
    auto b2 = params_.view("b2");

    double s[64];  // hidden activations; hidden_ <= 64 enforced below
    for (std::size_t j = 0; j < hidden_; ++j) {
        double a = b1[j] + w1[j * in] * t;
        for (std::size_t i = 0; i < dim_; ++i) a += w1[j * in + 1 + i] * y[i];
        s[j] = std::tanh(a);
    }
    for (std::size_t o = 0; o < dim_; ++o) {
        double acc = b2[o];
        for (std::size_t j = 0; j < hidden_; ++j) acc += w2[o * hidden_ + j] * s[j];
        out[o] = acc;
    }
}

void MlpField::vjp(double t, std::span<const double> y, std::span<const double> v,
                   std::span<double> vjp_y, std::span<double> vjp_params,
                   double theta_scale) const {
    check_finite_input(t, y, "MlpField::vjp");
    if (!vec::all_finite(v)) throw DomainError("MlpField::vjp: non-finite cotangent");

    const std::size_t in = dim_ + 1;
    auto w1 = params_.view("W1");
    auto w2 = params_.view("W2");
    auto b1 = params_.view("b1");

    const std::size_t off_w1 = 0;
    const std::size_t off_b1 = hidden_ * in;
    const std::size_t off_w2 = off_b1 + hidden_;
    const std::size_t off_b2 = off_w2 + dim_ * hidden_;

    double s[64];
    double va[64];  // cotangent at the pre-activation
    for (std::size_t j = 0; j < hidden_; ++j) {
        double a = b1[j] + w1[j * in] * t;
        for (std::size_t i = 0; i < dim_; ++i) a += w1[j * in + 1 + i] * y[i];
        s[j] = std::tanh(a);
    }

    // Through the output layer: va = (W2^T v) .* (1 - s^2).
    for (std::size_t j = 0; j < hidden_; ++j) {
        double vs = 0.0;
        for (std::size_t o = 0; o < dim_; ++o) vs += w2[o * hidden_ + j] * v[o];
        va[j] = vs * (1.0 - s[j] * s[j]);
    }

    // State pullback: W1^T va, dropping the t column.
    for (std::size_t i = 0; i < dim_; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < hidden_; ++j) acc += w1[j * in + 1 + i] * va[j];
        vjp_y[i] = acc;
    }

    // Parameter pullbacks: outer products with the layer inputs.
    for (std::size_t o = 0; o < dim_; ++o) {
        const double vo = theta_scale * v[o];
        for (std::size_t j = 0; j < hidden_; ++j) {
            vjp_params[off_w2 + o * hidden_ + j] += vo * s[j];
        }
        vjp_params[off_b2 + o] += vo;
    }
    for (std::size_t j = 0; j < hidden_; ++j) {
        const double vj = theta_scale * va[j];
        vjp_params[off_w1 + j * in] += vj * t;
        for (std::size_t i = 0; i < dim_; ++i) {
            vjp_params[off_w1 + j * in + 1 + i] += vj * y[i];
        }
        vjp_params[off_b1 + j] += vj;
    }
}

}  // namespace revode
