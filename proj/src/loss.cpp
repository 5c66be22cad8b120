#include "revode/loss.hpp"

#include "revode/errors.hpp"

namespace revode {

double mse_loss(const Trajectory& predicted, const Trajectory& target) {
    if (predicted.dim != target.dim || predicted.size() != target.size()) {
        throw ConfigError("mse_loss: trajectory shapes differ");
    }
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (std::abs(predicted.times[i] - target.times[i]) >
            1e-9 * std::max(1.0, std::abs(target.times[i]))) {
            throw ConfigError("mse_loss: time grids differ at row " + std::to_string(i));
        }
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < predicted.values.size(); ++i) {
        const double d = predicted.values[i] - target.values[i];
        acc += d * d;
    }
    return acc / static_cast<double>(predicted.values.size());
}

TrajectoryMse::TrajectoryMse(const Trajectory& target, std::size_t first_row)
    : target_(&target), first_row_(first_row) {
    if (first_row >= target.size()) throw ConfigError("TrajectoryMse: first_row out of range");
    n_obs_ = target.size() - first_row;
}

std::vector<double> TrajectoryMse::obs_times() const {
    return {target_->times.begin() + first_row_, target_->times.end()};
}

void TrajectoryMse::accumulate(std::size_t ordinal, std::span<const double> y) {
    auto row = target_->row(first_row_ + ordinal);
    for (std::size_t c = 0; c < target_->dim; ++c) {
        const double d = y[c] - row[c];
        loss_acc_ += d * d;
    }
}

double TrajectoryMse::loss() const {
    return loss_acc_ / static_cast<double>(n_obs_ * target_->dim);
}

void TrajectoryMse::gradient(std::size_t ordinal, std::span<const double> y,
                             std::span<double> grad_out) const {
    auto row = target_->row(first_row_ + ordinal);
    const double scale = 2.0 / static_cast<double>(n_obs_ * target_->dim);
    for (std::size_t c = 0; c < target_->dim; ++c) grad_out[c] = scale * (y[c] - row[c]);
}

}  // namespace revode
