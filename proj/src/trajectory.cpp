#include "revode/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "revode/errors.hpp"

namespace revode {

void Trajectory::validate() const {
    if (times.empty() || dim == 0 || values.size() != times.size() * dim) {
        throw DataError("trajectory: inconsistent dimensions");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) {
            throw DataError("trajectory: times must be strictly increasing (row " +
                            std::to_string(i) + ")");
        }
    }
    if (!vec::all_finite(times) || !vec::all_finite(values)) {
        throw DataError("trajectory: non-finite entries");
    }
}

Vec Trajectory::at(double t) const {
    if (t < times.front() - 1e-12 || t > times.back() + 1e-12) {
        throw DataError("interpolation time " + std::to_string(t) + " outside data range");
    }
    t = std::clamp(t, times.front(), times.back());
    const auto it = std::lower_bound(times.begin(), times.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - times.begin());
    if (hi == 0) hi = 1;
    if (hi >= times.size()) hi = times.size() - 1;
    const std::size_t lo = hi - 1;
    const double w = (t - times[lo]) / (times[hi] - times[lo]);
    Vec out(dim);
    auto a = row(lo);
    auto b = row(hi);
    for (std::size_t c = 0; c < dim; ++c) out[c] = (1.0 - w) * a[c] + w * b[c];
    return out;
}

void Trajectory::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << "t";
    for (std::size_t c = 0; c < dim; ++c) out << ",y" << c;
    out << "\n";
    char buf[64];
    for (std::size_t i = 0; i < size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", times[i]);
        out << buf;
        for (double v : row(i)) {
            std::snprintf(buf, sizeof(buf), ",%.17g", v);
            out << buf;
        }
        out << "\n";
    }
}

Trajectory Trajectory::read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    Trajectory traj;
    std::string line;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> fields;
        std::size_t col_no = 0;
        bool header = false;
        while (std::getline(ss, cell, ',')) {
            ++col_no;
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0') {
                if (row_no == 1) {
                    header = true;  // a non-numeric first row is the header
                    break;
                }
                throw DataError(path + ": non-numeric cell at row " + std::to_string(row_no) +
                                ", column " + std::to_string(col_no));
            }
            fields.push_back(v);
        }
        if (header) continue;
        if (fields.size() < 2) {
            throw DataError(path + ": row " + std::to_string(row_no) +
                            " needs a time column plus at least one value column");
        }
        if (traj.dim == 0) {
            traj.dim = fields.size() - 1;
        } else if (fields.size() - 1 != traj.dim) {
            throw DataError(path + ": row " + std::to_string(row_no) +
                            " has inconsistent column count");
        }
        traj.times.push_back(fields[0]);
        traj.values.insert(traj.values.end(), fields.begin() + 1, fields.end());
    }
    if (traj.times.empty()) throw DataError(path + ": no data rows");
    traj.validate();
    return traj;
}

IngestResult resample(const Trajectory& raw, std::pair<double, double> t_range,
                      std::size_t n_points, bool normalize) {
    raw.validate();
    if (n_points < 2) throw ConfigError("resample: need at least 2 points");
    if (!(t_range.second > t_range.first)) throw ConfigError("resample: empty time range");

    IngestResult res;
    res.traj.dim = raw.dim;
    res.traj.times.resize(n_points);
    res.traj.values.resize(n_points * raw.dim);
    const double span = t_range.second - t_range.first;
    for (std::size_t i = 0; i < n_points; ++i) {
        const double t =
            t_range.first + span * static_cast<double>(i) / static_cast<double>(n_points - 1);
        res.traj.times[i] = t;
        const Vec v = raw.at(t);
        std::copy(v.begin(), v.end(), res.traj.values.begin() + i * raw.dim);
    }

    res.stats.assign(raw.dim, ChannelStats{});
    if (normalize) {
        res.normalized = true;
        const auto n = static_cast<double>(n_points);
        for (std::size_t c = 0; c < raw.dim; ++c) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n_points; ++i) mean += res.traj.values[i * raw.dim + c];
            mean /= n;
            double var = 0.0;
            for (std::size_t i = 0; i < n_points; ++i) {
                const double d = res.traj.values[i * raw.dim + c] - mean;
                var += d * d;
            }
            var = std::max(var / n, 1e-12);
            const double stdev = std::sqrt(var);
            res.stats[c] = {mean, stdev};
            for (std::size_t i = 0; i < n_points; ++i) {
                double& v = res.traj.values[i * raw.dim + c];
                v = (v - mean) / stdev;
            }
        }
    }
    return res;
}

IngestResult ingest_csv(const std::string& path, std::pair<double, double> t_range,
                        std::size_t n_points, bool normalize) {
    return resample(Trajectory::read_csv(path), t_range, n_points, normalize);
}

void denormalize(Trajectory& traj, const std::vector<ChannelStats>& stats) {
    if (stats.size() != traj.dim) throw ConfigError("denormalize: stats/dim mismatch");
    for (std::size_t i = 0; i < traj.size(); ++i) {
        auto r = traj.row(i);
        for (std::size_t c = 0; c < traj.dim; ++c) r[c] = r[c] * stats[c].stdev + stats[c].mean;
    }
}

}  // namespace revode
