#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "diffsurv/hazard.hpp"
#include "diffsurv/path.hpp"
#include "diffsurv/rng.hpp"
#include "diffsurv/survival_data.hpp"

namespace diffsurv {

/// Lambda_k = left-Riemann sum of h(x_s) from the grid origin to node k.
/// Entry 0 is 0; the result is nondecreasing since h >= 0.
inline std::vector<double> cumulative_hazard_prefix(std::span<const double> times,
                                                    std::span<const double> values,
                                                    const HazardSpec& h) {
    std::vector<double> lambda(times.size());
    lambda[0] = 0.0;
    for (std::size_t k = 0; k + 1 < times.size(); ++k)
        lambda[k + 1] = lambda[k] + h(values[k]) * (times[k + 1] - times[k]);
    return lambda;
}

/// Integral of the hazard of the path from the origin up to grid node t.
inline double cumulative_hazard(const DiffusionPath& path, const HazardSpec& h, double t) {
    const std::size_t idx = path.grid.index_of(t);
    double acc = 0.0;
    for (std::size_t k = 0; k < idx; ++k)
        acc += h(path.values[k]) * path.grid.dt(k);
    return acc;
}

/// Censored log-likelihood of the observations given the path:
/// events contribute log h(x_{y_j}) - Lambda(y_j); censored times contribute
/// -Lambda(y_j). Returns -inf when the hazard vanishes at an event time (a
/// rejectable state, not an error). Every observation time must be a node and
/// the path must span the largest one.
inline double log_likelihood(std::span<const Observation> observations, const DiffusionPath& path,
                             const HazardSpec& h) {
    const auto lambda = cumulative_hazard_prefix(path.grid.nodes(), path.values, h);
    double acc = 0.0;
    for (const auto& o : observations) {
        const auto idx = path.grid.find(o.time);
        if (!idx) throw std::invalid_argument("log_likelihood: observation time off grid");
        acc -= lambda[*idx];
        if (o.event) {
            const double hv = h(path.values[*idx]);
            if (!(hv > 0.0)) return -std::numeric_limits<double>::infinity();
            acc += std::log(hv);
        }
    }
    return acc;
}

inline double log_likelihood(const SurvivalDataset& data, const DiffusionPath& path,
                             const HazardSpec& h) {
    return log_likelihood(std::span<const Observation>(data.observations), path, h);
}

struct Curve {
    std::vector<double> times;
    std::vector<double> values;
};

/// S(t) = exp(-Lambda(t)) at every grid node.
inline Curve survival_curve(const DiffusionPath& path, const HazardSpec& h) {
    const auto lambda = cumulative_hazard_prefix(path.grid.nodes(), path.values, h);
    Curve c{path.grid.nodes(), {}};
    c.values.resize(lambda.size());
    for (std::size_t k = 0; k < lambda.size(); ++k) c.values[k] = std::exp(-lambda[k]);
    return c;
}

/// h(x_t) at every grid node.
inline Curve hazard_curve(const DiffusionPath& path, const HazardSpec& h) {
    Curve c{path.grid.nodes(), {}};
    c.values.resize(path.values.size());
    for (std::size_t k = 0; k < path.values.size(); ++k) c.values[k] = h(path.values[k]);
    return c;
}

/// f(t) = h(x_t) * S(t), computed from the same S values so the identity
/// f = h * S holds exactly at every node.
inline Curve density_curve(const DiffusionPath& path, const HazardSpec& h) {
    const Curve s = survival_curve(path, h);
    Curve c{s.times, {}};
    c.values.resize(s.values.size());
    for (std::size_t k = 0; k < s.values.size(); ++k)
        c.values[k] = h(path.values[k]) * s.values[k];
    return c;
}

/// Smallest t with Lambda(t) >= target, linearly interpolated inside the
/// crossing interval (Lambda is piecewise linear under the left-Riemann
/// convention, so this is exact). +inf when the path never accumulates enough
/// hazard.
inline double invert_cumulative_hazard(const DiffusionPath& path, const HazardSpec& h,
                                       double target) {
    if (target <= 0.0) return path.grid.front();
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < path.grid.size(); ++k) {
        const double rate = h(path.values[k]);
        const double next = acc + rate * path.grid.dt(k);
        if (next >= target) {
            return path.grid[k] + (target - acc) / rate;  // rate > 0 since next > acc
        }
        acc = next;
    }
    return std::numeric_limits<double>::infinity();
}

struct EventDraw {
    double time = 0.0;
    bool event = true;
};

/// Event time via the exponential random barrier: draw E ~ Exp(1) and report
/// the first time the cumulative hazard reaches E, right-censoring at the
/// horizon when it never does.
inline EventDraw sample_event_time(const DiffusionPath& path, const HazardSpec& h, double horizon,
                                   Rng& rng) {
    const double barrier = rng.exponential(1.0);
    const double t = invert_cumulative_hazard(path, h, barrier);
    if (t <= horizon) return EventDraw{t, true};
    return EventDraw{horizon, false};
}

}  // namespace diffsurv
