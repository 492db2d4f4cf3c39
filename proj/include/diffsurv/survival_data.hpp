#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace diffsurv {

struct Observation {
    double time = 0.0;
    bool event = true;  // false = right-censored
    std::string group;
    std::vector<double> covariates;
};

/// Right-censored event times, optionally grouped and with per-subject
/// covariate vectors (names shared dataset-wide).
struct SurvivalDataset {
    std::vector<Observation> observations;
    std::vector<std::string> covariate_names;
    std::string time_unit;

    void validate() const {
        if (observations.empty()) throw std::invalid_argument("SurvivalDataset: no observations");
        for (const auto& o : observations) {
            if (!std::isfinite(o.time) || !(o.time > 0.0))
                throw std::invalid_argument("SurvivalDataset: times must be positive and finite");
            if (o.covariates.size() != covariate_names.size())
                throw std::invalid_argument("SurvivalDataset: covariate vector length mismatch");
        }
    }

    double max_time() const {
        double m = 0.0;
        for (const auto& o : observations) m = std::max(m, o.time);
        return m;
    }

    std::vector<std::string> group_labels() const {
        std::vector<std::string> labels;
        for (const auto& o : observations)
            if (std::find(labels.begin(), labels.end(), o.group) == labels.end())
                labels.push_back(o.group);
        std::sort(labels.begin(), labels.end());
        return labels;
    }

    std::vector<Observation> group(const std::string& label) const {
        std::vector<Observation> out;
        for (const auto& o : observations)
            if (o.group == label) out.push_back(o);
        return out;
    }

    std::size_t event_count() const {
        std::size_t n = 0;
        for (const auto& o : observations) n += o.event ? 1 : 0;
        return n;
    }
};

}  // namespace diffsurv
