#pragma once

#include "revode/field.hpp"
#include "revode/trajectory.hpp"

namespace revode {

// Chandrasekhar white dwarf density equation reduced to first order with
// u = phi, w = phi':
//   u' = w
//   w' = -(2/r) w - max(u^2 - C, 0)^{3/2}
// The r -> 0 singularity of the 2w/r term is handled by its series limit,
// w'(0) = -max(u^2 - C, 0)^{3/2} / 3.
class WhiteDwarfField final : public VectorField {
  public:
    using VectorField::evaluate;
    using VectorField::vjp;
    explicit WhiteDwarfField(double C);

    std::string_view kind() const override { return "analytic-white-dwarf"; }
    std::size_t dim() const override { return 2; }
    const Params& params() const override { return params_; }
    void set_params(Params p) override;
    double constant() const { return params_[0]; }

    void evaluate(double r, std::span<const double> y, std::span<double> out) const override;
    void vjp(double r, std::span<const double> y, std::span<const double> v,
             std::span<double> vjp_y, std::span<double> vjp_params,
             double theta_scale) const override;

  private:
    Params params_;
};

// High-accuracy reference trajectory of the white dwarf system on a uniform
// grid over r_range, starting from phi = 1, phi' = 0.
Trajectory generate_white_dwarf(double C = 0.001, std::pair<double, double> r_range = {0.0, 5.0},
                                std::size_t n_points = 1000, double oracle_h = 1e-5);

// Two linearly coupled damped springs (positions and velocities of both
// masses). Linear dynamics, so the vjp is exact and parameter-free.
class CoupledOscillatorField final : public VectorField {
  public:
    using VectorField::evaluate;
    using VectorField::vjp;
    CoupledOscillatorField(double k1 = 4.0, double k2 = 4.0, double k_couple = 1.0,
                           double damping = 0.1);

    std::string_view kind() const override { return "coupled-oscillator"; }
    std::size_t dim() const override { return 4; }
    const Params& params() const override { return params_; }
    void set_params(Params p) override;

    void evaluate(double t, std::span<const double> y, std::span<double> out) const override;
    void vjp(double t, std::span<const double> y, std::span<const double> v,
             std::span<double> vjp_y, std::span<double> vjp_params,
             double theta_scale) const override;

  private:
    double a_[16];  // row-major system matrix
    Params params_;
};

Trajectory generate_coupled_oscillator(std::pair<double, double> t_range = {0.0, 3.0},
                                       std::size_t n_points = 500, double oracle_h = 1e-4);

// Planar double pendulum (equal unit masses and lengths), state
// (theta1, theta2, omega1, omega2). Chaotic for large angles; used as the
// adaptive-solver stress field. Forward evaluation only.
class DoublePendulumField final : public VectorField {
  public:
    using VectorField::evaluate;
    using VectorField::vjp;
    DoublePendulumField();

    std::string_view kind() const override { return "double-pendulum"; }
    std::size_t dim() const override { return 4; }
    const Params& params() const override { return params_; }
    void set_params(Params p) override;

    void evaluate(double t, std::span<const double> y, std::span<double> out) const override;
    // Not differentiated anywhere; throws ConfigError.
    void vjp(double t, std::span<const double> y, std::span<const double> v,
             std::span<double> vjp_y, std::span<double> vjp_params,
             double theta_scale) const override;

  private:
    Params params_;
};

}  // namespace revode
