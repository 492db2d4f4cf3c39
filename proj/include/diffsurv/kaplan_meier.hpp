#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "diffsurv/survival_data.hpp"

namespace diffsurv {

/// Right-continuous step function: values[k] applies on [times[k], times[k+1]).
/// An implicit step value 1 applies before times[0].
struct StepCurve {
    std::vector<double> times;
    std::vector<double> values;

    double at(double t) const {
        double v = 1.0;
        for (std::size_t k = 0; k < times.size() && times[k] <= t; ++k) v = values[k];
        return v;
    }
};

/// Product-limit estimator with right censoring. Ties: deaths are processed
/// before censorings at equal times, so subjects censored at t still count as
/// at risk for deaths at t.
inline StepCurve kaplan_meier(std::span<const Observation> observations) {
    if (observations.empty()) throw std::invalid_argument("kaplan_meier: no observations");
    std::vector<std::pair<double, bool>> obs;  // (time, event)
    obs.reserve(observations.size());
    for (const auto& o : observations) obs.emplace_back(o.time, o.event);
    std::sort(obs.begin(), obs.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second > b.second;  // events first
    });

    StepCurve curve;
    double s = 1.0;
    const std::size_t n = obs.size();
    std::size_t i = 0;
    while (i < n) {
        const double t = obs[i].first;
        std::size_t deaths = 0;
        std::size_t at_tied = 0;
        while (i + at_tied < n && obs[i + at_tied].first == t) {
            if (obs[i + at_tied].second) ++deaths;
            ++at_tied;
        }
        if (deaths > 0) {
            const double at_risk = static_cast<double>(n - i);
            s *= (at_risk - static_cast<double>(deaths)) / at_risk;
            curve.times.push_back(t);
            curve.values.push_back(s);
        }
        i += at_tied;
    }
    return curve;
}

inline StepCurve kaplan_meier(const SurvivalDataset& data) {
    return kaplan_meier(std::span<const Observation>(data.observations));
}

}  // namespace diffsurv
