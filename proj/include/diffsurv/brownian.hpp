#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "diffsurv/path.hpp"
#include "diffsurv/rng.hpp"
#include "diffsurv/time_grid.hpp"

namespace diffsurv {

inline NoiseIncrements sample_noise(const TimeGrid& grid, Rng& rng) {
    std::vector<double> inc(grid.size() - 1);
    for (std::size_t k = 0; k < inc.size(); ++k)
        inc[k] = std::sqrt(grid.dt(k)) * rng.gaussian();
    return NoiseIncrements{grid, std::move(inc)};
}

/// sigma-scaled Brownian motion from the given origin: independent Gaussian
/// increments with variance sigma^2 * dt per interval.
inline DiffusionPath sample_brownian_path(const TimeGrid& grid, double sigma, double origin,
                                          Rng& rng) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("sample_brownian_path: sigma must be >= 0");
    std::vector<double> values(grid.size());
    values[0] = origin;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k)
        values[k + 1] = values[k] + sigma * std::sqrt(grid.dt(k)) * rng.gaussian();
    return DiffusionPath{grid, std::move(values)};
}

/// Sequential conditional-Gaussian construction of a sigma-scaled Brownian
/// bridge on `times` (endpoints included), pinned at (left, right). Writes the
/// times.size()-2 interior values into out_interior.
inline void fill_bridge_interior(std::span<const double> times, double left, double right,
                                 double sigma, Rng& rng, std::span<double> out_interior) {
    const std::size_t m = times.size();
    if (out_interior.size() + 2 != m)
        throw std::invalid_argument("fill_bridge_interior: output size mismatch");
    const double t_end = times[m - 1];
    double x = left;
    double t_prev = times[0];
    for (std::size_t k = 1; k + 1 < m; ++k) {
        const double t = times[k];
        const double remain = t_end - t_prev;
        const double mean = x + (right - x) * (t - t_prev) / remain;
        const double var = sigma * sigma * (t - t_prev) * (t_end - t) / remain;
        x = mean + std::sqrt(var) * rng.gaussian();
        out_interior[k - 1] = x;
        t_prev = t;
    }
}

/// Random walk continuation: values at times[1..] of a sigma-scaled Brownian
/// motion started from `left` at times[0].
inline void fill_free_walk(std::span<const double> times, double left, double sigma, Rng& rng,
                           std::span<double> out_after_left) {
    if (out_after_left.size() + 1 != times.size())
        throw std::invalid_argument("fill_free_walk: output size mismatch");
    double x = left;
    for (std::size_t k = 1; k < times.size(); ++k) {
        x += sigma * std::sqrt(times[k] - times[k - 1]) * rng.gaussian();
        out_after_left[k - 1] = x;
    }
}

/// Brownian bridge pinned exactly at start_value and end_value.
inline DiffusionPath sample_brownian_bridge(const TimeGrid& grid, double sigma, double start_value,
                                            double end_value, Rng& rng) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("sample_brownian_bridge: sigma must be >= 0");
    std::vector<double> values(grid.size());
    values.front() = start_value;
    values.back() = end_value;
    if (grid.size() > 2)
        fill_bridge_interior(grid.nodes(), start_value, end_value, sigma, rng,
                             std::span<double>(values).subspan(1, grid.size() - 2));
    return DiffusionPath{grid, std::move(values)};
}

}  // namespace diffsurv
