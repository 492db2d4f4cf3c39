#pragma once

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "diffsurv/time_grid.hpp"

namespace diffsurv {

/// A sample path discretized on a time grid: one value per node.
struct DiffusionPath {
    TimeGrid grid;
    std::vector<double> values;

    double value_at(double t) const { return values[grid.index_of(t)]; }
};

inline DiffusionPath make_path(TimeGrid grid, std::vector<double> values) {
    if (values.size() != grid.size())
        throw std::invalid_argument("DiffusionPath: values/grid size mismatch");
    return DiffusionPath{std::move(grid), std::move(values)};
}

/// Brownian increments over each grid interval: increment k has law
/// N(0, dt_k) under the standard Wiener measure.
struct NoiseIncrements {
    TimeGrid grid;
    std::vector<double> increments;
};

inline NoiseIncrements make_noise(TimeGrid grid, std::vector<double> increments) {
    if (increments.size() + 1 != grid.size())
        throw std::invalid_argument("NoiseIncrements: need one increment per interval");
    return NoiseIncrements{std::move(grid), std::move(increments)};
}

/// Cumulative sum of the increments from the given origin; realizes the
/// Brownian path the increments describe.
inline DiffusionPath cumulate_noise(const NoiseIncrements& noise, double origin = 0.0) {
    std::vector<double> values(noise.grid.size());
    values[0] = origin;
    for (std::size_t k = 0; k < noise.increments.size(); ++k)
        values[k + 1] = values[k] + noise.increments[k];
    return DiffusionPath{noise.grid, std::move(values)};
}

}  // namespace diffsurv
