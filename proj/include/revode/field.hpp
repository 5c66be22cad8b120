#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>

#include "revode/params.hpp"
#include "revode/vec.hpp"

namespace revode {

// Evaluatable dynamics f(t, y; theta) with vector-Jacobian products. All
// implementations are pure functions of their inputs and safe to share
// across threads; params are replaced wholesale between solves, never
// mutated during one.
class VectorField {
  public:
    virtual ~VectorField() = default;

    virtual std::string_view kind() const = 0;
    virtual std::size_t dim() const = 0;

    virtual const Params& params() const = 0;
    virtual void set_params(Params p) = 0;

    // out = f(t, y). Throws DomainError on non-finite input.
    virtual void evaluate(double t, std::span<const double> y, std::span<double> out) const = 0;

    // vjp_y = v . df/dy (overwritten); vjp_params += theta_scale * v . df/dtheta.
    // Throws DomainError on non-finite v.
    virtual void vjp(double t, std::span<const double> y, std::span<const double> v,
                     std::span<double> vjp_y, std::span<double> vjp_params,
                     double theta_scale) const = 0;

    std::size_t param_count() const { return params().size(); }

    // Allocating helpers for tests and small callers.
    Vec evaluate(double t, const Vec& y) const;
    std::pair<Vec, Vec> vjp(double t, const Vec& y, const Vec& v) const;
};

// f(t, y) = alpha * y, with alpha stored as the single parameter.
class LinearField final : public VectorField {
  public:
    using VectorField::evaluate;
    using VectorField::vjp;
    LinearField(std::size_t dim, double alpha);

    std::string_view kind() const override { return "analytic-linear"; }
    std::size_t dim() const override { return dim_; }
    const Params& params() const override { return params_; }
    void set_params(Params p) override;
    double alpha() const { return params_[0]; }

    void evaluate(double t, std::span<const double> y, std::span<double> out) const override;
    void vjp(double t, std::span<const double> y, std::span<const double> v,
             std::span<double> vjp_y, std::span<double> vjp_params,
             double theta_scale) const override;

  private:
    std::size_t dim_;
    Params params_;
};

// Two-layer tanh network: f(t, y) = W2 * tanh(W1 * [t; y] + b1) + b2.
// Time is appended to the state as one extra input coordinate. The VJPs are
// closed-form per layer (transpose products, tanh' = 1 - tanh^2).
class MlpField final : public VectorField {
  public:
    using VectorField::evaluate;
    using VectorField::vjp;
    MlpField(std::size_t state_dim, std::size_t hidden, Params p);

    static Params zero_params(std::size_t state_dim, std::size_t hidden);
    // Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer, seeded.
    static Params random_params(std::size_t state_dim, std::size_t hidden, std::uint64_t seed);

    std::string_view kind() const override { return "mlp"; }
    std::size_t dim() const override { return dim_; }
    std::size_t hidden() const { return hidden_; }
    const Params& params() const override { return params_; }
    void set_params(Params p) override;

    void evaluate(double t, std::span<const double> y, std::span<double> out) const override;
    void vjp(double t, std::span<const double> y, std::span<const double> v,
             std::span<double> vjp_y, std::span<double> vjp_params,
             double theta_scale) const override;

  private:
    std::size_t dim_;
    std::size_t hidden_;
    Params params_;
};

}  // namespace revode
