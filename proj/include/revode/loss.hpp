#pragma once

#include "revode/trajectory.hpp"
#include "revode/vec.hpp"

namespace revode {

// Mean over all entries of the squared error. Grids must match.
double mse_loss(const Trajectory& predicted, const Trajectory& target);

// Streaming form used against the solvers: feed predictions one observation
// at a time, read the loss at the end, and evaluate per-observation gradients
// (2 (y - target_n) / (M d)) on demand during the backward sweep.
class TrajectoryMse {
  public:
    // Observations are rows first_row..target.size()-1 of `target`.
    TrajectoryMse(const Trajectory& target, std::size_t first_row);

    std::size_t n_obs() const { return n_obs_; }
    double obs_time(std::size_t ordinal) const { return target_->times[first_row_ + ordinal]; }
    std::vector<double> obs_times() const;

    void reset() { loss_acc_ = 0.0; }
    void accumulate(std::size_t ordinal, std::span<const double> y);
    double loss() const;

    void gradient(std::size_t ordinal, std::span<const double> y, std::span<double> grad_out) const;

  private:
    const Trajectory* target_;
    std::size_t first_row_;
    std::size_t n_obs_;
    double loss_acc_ = 0.0;
};

}  // namespace revode
