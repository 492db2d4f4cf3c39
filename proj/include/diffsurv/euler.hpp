#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "diffsurv/drift.hpp"
#include "diffsurv/path.hpp"

namespace diffsurv {

/// x_{k+1} = x_k + beta(x_k) dt_k + sigma dB_k over times[out_offset..].
/// `values` holds the full path; entries before out_offset must already be
/// set. Throws if the drift turns non-finite (explosive dynamics must fail
/// loudly rather than propagate NaN).
template <typename BetaFn>
inline void euler_recursion(std::span<const double> times, BetaFn&& beta, double sigma,
                            std::span<const double> noise, std::span<double> values,
                            std::size_t from = 0) {
    for (std::size_t k = from; k + 1 < times.size(); ++k) {
        const double b = beta(values[k]);
        if (!std::isfinite(b))
            throw std::runtime_error("euler_recursion: drift is not finite at t=" +
                                     std::to_string(times[k]) +
                                     " (explosive or ill-posed drift at this step size)");
        values[k + 1] = values[k] + b * (times[k + 1] - times[k]) + sigma * noise[k];
    }
}

/// Euler-Maruyama path of dX = beta(X, theta) dt + sigma dB driven by the
/// given increments; deterministic given the noise.
inline DiffusionPath euler_maruyama_simulate(const DriftSpec& drift,
                                             std::span<const double> theta, double sigma,
                                             double x0, const TimeGrid& grid,
                                             const NoiseIncrements& noise) {
    if (!noise.grid.same_nodes(grid))
        throw std::invalid_argument("euler_maruyama_simulate: noise grid differs from path grid");
    std::vector<double> values(grid.size());
    values[0] = x0;
    euler_recursion(grid.nodes(), [&](double x) { return drift.value(x, theta); }, sigma,
                    noise.increments, values);
    return DiffusionPath{grid, std::move(values)};
}

}  // namespace diffsurv
