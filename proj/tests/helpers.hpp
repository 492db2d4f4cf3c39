#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

// Shared statistical helpers for the test suites.

namespace testutil {

inline double mean(std::span<const double> xs) {
    double s = 0.0;
    for (const double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double variance(std::span<const double> xs) {
    const double m = mean(xs);
    double s = 0.0;
    for (const double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

/// One-sample Kolmogorov-Smirnov statistic against a CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

/// Critical value of the KS statistic at significance alpha (asymptotic).
inline double ks_critical(std::size_t n, double alpha) {
    return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

inline bool ks_pass(std::vector<double> xs, const std::function<double(double)>& cdf,
                    double alpha) {
    const std::size_t n = xs.size();
    return ks_statistic(std::move(xs), cdf) < ks_critical(n, alpha);
}

inline double normal_cdf(double x, double mu = 0.0, double sd = 1.0) {
    return 0.5 * std::erfc(-(x - mu) / (sd * std::sqrt(2.0)));
}

inline double exponential_cdf(double x, double rate) {
    return x <= 0.0 ? 0.0 : 1.0 - std::exp(-rate * x);
}

}  // namespace testutil
