#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffsurv/mcmc.hpp"

namespace diffsurv {

/// Posterior functional summary on an output grid: nodewise mean with
/// pointwise highest-posterior-density bands.
struct CurveEstimate {
    std::vector<double> times;
    std::vector<double> mean;
    std::vector<double> band_lo;
    std::vector<double> band_hi;
    double level = 0.90;
};

/// Shortest contiguous window of the sorted draws containing
/// ceil(level * N) values; ties broken by the lowest starting index.
inline std::pair<double, double> hpd_interval(std::span<const double> draws, double level) {
    if (draws.size() < 20) throw std::invalid_argument("hpd_interval: need at least 20 draws");
    if (!(level > 0.0) || !(level < 1.0)) throw std::invalid_argument("hpd_interval: bad level");
    std::vector<double> sorted(draws.begin(), draws.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const auto w = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n)));
    std::size_t best = 0;
    double best_len = sorted[w - 1] - sorted[0];
    for (std::size_t i = 1; i + w <= n; ++i) {
        const double len = sorted[i + w - 1] - sorted[i];
        if (len < best_len) {
            best_len = len;
            best = i;
        }
    }
    return {sorted[best], sorted[best + w - 1]};
}

/// Per-node HPD bands for a matrix of curve draws ([draw][node]).
inline std::pair<std::vector<double>, std::vector<double>> pointwise_hpd_band(
    const std::vector<std::vector<double>>& draws, double level) {
    if (draws.empty()) throw std::invalid_argument("pointwise_hpd_band: no draws");
    const std::size_t nodes = draws.front().size();
    std::vector<double> lo(nodes), hi(nodes), column(draws.size());
    for (std::size_t k = 0; k < nodes; ++k) {
        for (std::size_t i = 0; i < draws.size(); ++i) {
            if (draws[i].size() != nodes)
                throw std::invalid_argument("pointwise_hpd_band: ragged draws");
            column[i] = draws[i][k];
        }
        const auto [l, h] = hpd_interval(column, level);
        lo[k] = l;
        hi[k] = h;
    }
    return {std::move(lo), std::move(hi)};
}

/// Nodewise mean plus pointwise HPD bands.
inline CurveEstimate curve_posterior_mean(std::span<const double> times,
                                          const std::vector<std::vector<double>>& draws,
                                          double level = 0.90) {
    if (draws.empty()) throw std::invalid_argument("curve_posterior_mean: no draws");
    const std::size_t nodes = times.size();
    CurveEstimate est;
    est.times.assign(times.begin(), times.end());
    est.level = level;
    est.mean.assign(nodes, 0.0);
    for (const auto& d : draws) {
        if (d.size() != nodes) throw std::invalid_argument("curve_posterior_mean: grid mismatch");
        for (std::size_t k = 0; k < nodes; ++k) est.mean[k] += d[k];
    }
    for (auto& v : est.mean) v /= static_cast<double>(draws.size());
    if (draws.size() >= 20) {
        auto [lo, hi] = pointwise_hpd_band(draws, level);
        est.band_lo = std::move(lo);
        est.band_hi = std::move(hi);
    } else {
        // too few draws for a band: collapse to the min/max envelope
        est.band_lo = draws.front();
        est.band_hi = draws.front();
        for (const auto& d : draws)
            for (std::size_t k = 0; k < nodes; ++k) {
                est.band_lo[k] = std::min(est.band_lo[k], d[k]);
                est.band_hi[k] = std::max(est.band_hi[k], d[k]);
            }
    }
    return est;
}

struct Diagnostics {
    std::vector<double> acf;  // acf[k] = lag-k autocorrelation, acf[0] = 1
    double ess = 0.0;
    double iat = 0.0;  // N / ESS
    bool constant_series = false;
};

/// Sample ACF up to max_lag; ESS with the initial-positive-sequence
/// truncation (adjacent-lag pairs are summed and the sum is cut at the first
/// nonpositive pair). A constant series is flagged and reported as ESS = N.
inline Diagnostics acf_ess(std::span<const double> series, std::size_t max_lag) {
    const std::size_t n = series.size();
    if (n <= max_lag) throw std::invalid_argument("acf_ess: series shorter than max_lag");
    Diagnostics d;
    double mean = 0.0;
    for (const double v : series) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const double v : series) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    if (!(var > 0.0)) {
        d.constant_series = true;
        d.acf.assign(max_lag + 1, 0.0);
        d.acf[0] = 1.0;
        d.ess = static_cast<double>(n);
        d.iat = 1.0;
        return d;
    }
    d.acf.resize(max_lag + 1);
    for (std::size_t k = 0; k <= max_lag; ++k) {
        double g = 0.0;
        for (std::size_t i = 0; i + k < n; ++i) g += (series[i] - mean) * (series[i + k] - mean);
        d.acf[k] = g / (static_cast<double>(n) * var);
    }
    double tail = 0.0;
    for (std::size_t j = 1; 2 * j <= max_lag; ++j) {
        const double pair = d.acf[2 * j - 1] + d.acf[2 * j];
        if (pair <= 0.0) break;
        tail += pair;
    }
    d.iat = std::max(1.0, 1.0 + 2.0 * tail);
    d.ess = static_cast<double>(n) / d.iat;
    return d;
}

}  // namespace diffsurv
