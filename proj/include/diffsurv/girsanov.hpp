#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>

#include "diffsurv/drift.hpp"
#include "diffsurv/path.hpp"

namespace diffsurv {

/// Discretized log Radon-Nikodym derivative of the drifted law against the
/// sigma-scaled Wiener law over node indices [ia, ib]:
///
///   sum_k beta(x_k)/sigma^2 * (x_{k+1}-x_k)  -  1/2 sum_k beta(x_k)^2/sigma^2 * dt_k
///
/// with beta evaluated at the left endpoint of each interval. This is exactly
/// the log-ratio of Gaussian transition products for the Euler scheme, so
/// acceptance ratios built from it are exact for the discretized model.
template <typename BetaFn>
inline double girsanov_logdensity_core(std::span<const double> times,
                                       std::span<const double> values, BetaFn&& beta,
                                       double sigma, std::size_t ia, std::size_t ib) {
    double acc = 0.0;
    const double inv_s2 = 1.0 / (sigma * sigma);
    for (std::size_t k = ia; k < ib; ++k) {
        const double b = beta(values[k]);
        const double dx = values[k + 1] - values[k];
        const double dt = times[k + 1] - times[k];
        acc += inv_s2 * (b * dx - 0.5 * b * b * dt);
    }
    return acc;
}

/// Window form: [a, b] must both be grid nodes.
inline double girsanov_logdensity(const DiffusionPath& path, const DriftSpec& drift,
                                  std::span<const double> theta, double sigma, double a,
                                  double b) {
    if (!(sigma > 0.0)) throw std::invalid_argument("girsanov_logdensity: sigma must be positive");
    const std::size_t ia = path.grid.index_of(a);
    const std::size_t ib = path.grid.index_of(b);
    if (ia > ib) throw std::invalid_argument("girsanov_logdensity: window endpoints out of order");
    return girsanov_logdensity_core(path.grid.nodes(), path.values,
                                    [&](double x) { return drift.value(x, theta); }, sigma, ia,
                                    ib);
}

}  // namespace diffsurv
