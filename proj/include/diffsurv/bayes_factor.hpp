#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffsurv/brownian.hpp"
#include "diffsurv/euler.hpp"
#include "diffsurv/mcmc.hpp"
#include "diffsurv/model.hpp"
#include "diffsurv/survival.hpp"

namespace diffsurv {

struct BayesFactorResult {
    double log_ml_1 = 0.0;
    double log_ml_2 = 0.0;
    double log_bf = 0.0;
    double bf = 0.0;
    double se_log_ml_1 = 0.0;
    double se_log_ml_2 = 0.0;
    double se_log_bf = 0.0;
    std::size_t n_samples = 0;
};

namespace detail {

/// log mean(exp(l_i)) and the delta-method standard error of the log mean.
inline std::pair<double, double> log_mean_exp_with_se(const std::vector<double>& logs) {
    double m = -std::numeric_limits<double>::infinity();
    for (const double l : logs) m = std::max(m, l);
    if (m == -std::numeric_limits<double>::infinity())
        throw std::runtime_error(
            "bayes_factor: every prior draw produced zero likelihood (numerical underflow); "
            "increase n_samples or revisit the model/prior configuration");
    const double n = static_cast<double>(logs.size());
    double mean_w = 0.0;
    for (const double l : logs) mean_w += std::exp(l - m);
    mean_w /= n;
    double var_w = 0.0;
    for (const double l : logs) {
        const double d = std::exp(l - m) - mean_w;
        var_w += d * d;
    }
    var_w /= (n - 1.0);
    const double se_log = std::sqrt(var_w / n) / mean_w;
    return {m + std::log(mean_w), se_log};
}

inline std::vector<double> prior_predictive_logliks(const ModelInstance& model,
                                                    const SurvivalDataset& data,
                                                    std::size_t n_samples, double dt,
                                                    const Rng& base) {
    if (model.covariates)
        throw std::invalid_argument("bayes_factor: covariate models are not supported here");
    struct Group {
        std::vector<Observation> obs;
        TimeGrid grid;
    };
    std::vector<Group> groups;
    std::vector<std::string> labels =
        model.pool_groups ? std::vector<std::string>{} : data.group_labels();
    for (const auto& label : labels) {
        Group g{data.group(label), make_grid(model.time_origin, 1.0, 1.0)};
        std::vector<double> times;
        double y_max = model.time_origin;
        for (const auto& o : g.obs) {
            times.push_back(o.time);
            y_max = std::max(y_max, o.time);
        }
        g.grid = make_grid(model.time_origin, y_max, dt, times);
        groups.push_back(std::move(g));
    }
    if (model.pool_groups) {
        Group g{data.observations, make_grid(model.time_origin, 1.0, 1.0)};
        std::vector<double> times;
        double y_max = model.time_origin;
        for (const auto& o : g.obs) {
            times.push_back(o.time);
            y_max = std::max(y_max, o.time);
        }
        g.grid = make_grid(model.time_origin, y_max, dt, times);
        groups.push_back(std::move(g));
    }

    std::vector<double> logliks(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        Rng rng = base.fork(i);
        const auto theta = model.prior.sample(rng);
        const double sigma = model.sigma_mode == SigmaMode::Unknown
                                 ? rng.exponential(model.sigma_prior.mean)
                                 : model.sigma;
        double ll = 0.0;
        for (const auto& g : groups) {
            const auto noise = sample_noise(g.grid, rng);
            try {
                const auto path =
                    euler_maruyama_simulate(model.drift, theta, sigma, model.x0, g.grid, noise);
                ll += log_likelihood(g.obs, path, model.hazard);
            } catch (const std::runtime_error&) {
                ll = -std::numeric_limits<double>::infinity();  // exploded draw: zero likelihood
            }
            if (ll == -std::numeric_limits<double>::infinity()) break;
        }
        logliks[i] = ll;
    }
    return logliks;
}

}  // namespace detail

/// Marginal likelihoods by Monte Carlo over the prior: draw (theta, paths)
/// from the prior, average the data likelihood. Both models consume the same
/// per-draw randomness streams, so structurally identical models give
/// identical estimates and BF = 1 exactly. The reported SE (delta method on
/// each log-mean) flags the estimator's variance.
inline BayesFactorResult bayes_factor_prior_mc(const ModelInstance& model_1,
                                               const ModelInstance& model_2,
                                               const SurvivalDataset& data,
                                               std::size_t n_samples, double dt,
                                               std::uint64_t seed) {
    if (n_samples < 1000) throw std::invalid_argument("bayes_factor: need n_samples >= 1000");
    data.validate();
    const Rng base(seed);
    const auto l1 = detail::prior_predictive_logliks(model_1, data, n_samples, dt, base);
    const auto l2 = detail::prior_predictive_logliks(model_2, data, n_samples, dt, base);
    BayesFactorResult r;
    r.n_samples = n_samples;
    std::tie(r.log_ml_1, r.se_log_ml_1) = detail::log_mean_exp_with_se(l1);
    std::tie(r.log_ml_2, r.se_log_ml_2) = detail::log_mean_exp_with_se(l2);
    r.log_bf = r.log_ml_1 - r.log_ml_2;
    r.bf = std::exp(r.log_bf);
    r.se_log_bf = std::sqrt(r.se_log_ml_1 * r.se_log_ml_1 + r.se_log_ml_2 * r.se_log_ml_2);
    return r;
}

}  // namespace diffsurv
