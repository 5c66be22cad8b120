#pragma once

#include <string>
#include <utility>
#include <vector>

#include "revode/vec.hpp"

namespace revode {

// Sampled multichannel time series: strictly increasing times, values stored
// row-major (n_samples x dim).
struct Trajectory {
    Vec times;
    Vec values;
    std::size_t dim = 0;

    std::size_t size() const { return times.size(); }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
    std::span<double> row(std::size_t i) { return {values.data() + i * dim, dim}; }

    void validate() const;  // throws DataError on unsorted times or non-finite values

    // Linear interpolation at t (t must lie within [times.front(), times.back()]).
    Vec at(double t) const;

    // Header `t,y0,...,y{d-1}`, full-precision rows.
    void write_csv(const std::string& path) const;
    static Trajectory read_csv(const std::string& path);
};

struct ChannelStats {
    double mean = 0.0;
    double stdev = 1.0;
};

struct IngestResult {
    Trajectory traj;
    std::vector<ChannelStats> stats;  // identity stats when normalize was off
    bool normalized = false;
};

// Reads a CSV (time column first), linearly interpolates onto a uniform grid
// of n_points over t_range, and optionally maps each channel to zero mean and
// unit variance. The variance is floored at 1e-12 so constant channels come
// out as zeros instead of NaNs.
IngestResult ingest_csv(const std::string& path, std::pair<double, double> t_range,
                        std::size_t n_points, bool normalize);

// Same resample/normalize pipeline on an in-memory trajectory.
IngestResult resample(const Trajectory& raw, std::pair<double, double> t_range,
                      std::size_t n_points, bool normalize);

void denormalize(Trajectory& traj, const std::vector<ChannelStats>& stats);

}  // namespace revode
