#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "diffsurv/drift.hpp"
#include "diffsurv/hazard.hpp"
#include "diffsurv/lamperti.hpp"
#include "diffsurv/prior.hpp"
#include "diffsurv/survival_data.hpp"

namespace diffsurv {

/// Independence-sampler proposal for a scalar parameter.
struct ProposalSpec {
    enum class Kind { Prior, Beta };
    Kind kind = Kind::Prior;
    double a = 1.0;
    double b = 1.0;

    static ProposalSpec use_prior() { return ProposalSpec{}; }
    static ProposalSpec beta(double a_, double b_) {
        if (!(a_ > 0.0) || !(b_ > 0.0)) throw std::invalid_argument("ProposalSpec::beta: bad shape");
        return ProposalSpec{Kind::Beta, a_, b_};
    }
};

enum class SigmaMode { Fixed, Unknown };

/// Covariate cells and the intercept-centering coefficients, frozen from the
/// dataset at model-build time.
struct CovariateModelSpec {
    std::vector<std::string> names;
    std::vector<std::vector<double>> cells;   // distinct covariate vectors
    std::vector<double> shares;               // sample mean of each covariate
    std::vector<std::size_t> drift_covariates;  // indices entering the drift scale

    static CovariateModelSpec from_dataset(const SurvivalDataset& data,
                                           std::vector<std::size_t> drift_covariates) {
        data.validate();
        if (data.covariate_names.empty())
            throw std::invalid_argument("CovariateModelSpec: dataset has no covariates");
        CovariateModelSpec spec;
        spec.names = data.covariate_names;
        spec.drift_covariates = std::move(drift_covariates);
        for (const std::size_t j : spec.drift_covariates)
            if (j >= spec.names.size())
                throw std::invalid_argument("CovariateModelSpec: drift covariate index out of range");
        spec.shares.assign(spec.names.size(), 0.0);
        for (const auto& o : data.observations) {
            auto it = std::find(spec.cells.begin(), spec.cells.end(), o.covariates);
            if (it == spec.cells.end()) spec.cells.push_back(o.covariates);
            for (std::size_t i = 0; i < spec.shares.size(); ++i) spec.shares[i] += o.covariates[i];
        }
        for (auto& s : spec.shares) s /= static_cast<double>(data.observations.size());
        std::sort(spec.cells.begin(), spec.cells.end());
        return spec;
    }

    std::size_t cell_of(std::span<const double> z) const {
        for (std::size_t k = 0; k < cells.size(); ++k)
            if (std::equal(z.begin(), z.end(), cells[k].begin(), cells[k].end())) return k;
        throw std::invalid_argument("CovariateModelSpec: covariate vector matches no cell");
    }

    std::string cell_label(std::size_t k) const {
        std::string s;
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (i) s += "_";
            s += names[i] + "=" + std::to_string(static_cast<long long>(cells[k][i]));
        }
        return s;
    }
};

/// A fully assembled latent-diffusion survival model: drift family, hazard
/// map, diffusion coefficient (fixed or with a prior), starting point and
/// parameter priors. Immutable after construction.
struct ModelInstance {
    std::string name;
    DriftSpec drift = DriftSpec::none();
    HazardSpec hazard = HazardSpec::absolute();
    PriorSpec prior;
    double sigma = 1.0;  // fixed value, or the initial value when unknown
    SigmaMode sigma_mode = SigmaMode::Fixed;
    ExponentialPrior sigma_prior{1.0};
    double x0 = 0.0;
    double time_origin = 0.0;
    // treat all observations as one group (ignore dataset labels)
    bool pool_groups = false;
    // scalar-parameter proposal defaults, keyed by position within prior.scalars
    std::map<std::size_t, ProposalSpec> proposal_hints;
    std::optional<CovariateModelSpec> covariates;
    // state transform used when the model lives in transformed coordinates
    std::function<double(double)> state_forward;
    std::function<double(double)> state_inverse;

    std::size_t theta_dim() const { return prior.dim(); }
    std::size_t cell_count() const { return covariates ? covariates->cells.size() : 1; }

    bool has_conjugate_block() const {
        return !covariates && drift.has_conjugate_block() && prior.block.has_value() &&
               prior.block->mean.size() == drift.linear_count();
    }

    double cell_x0(std::size_t cell, std::span<const double> theta) const {
        if (!covariates) return x0;
        const auto& spec = *covariates;
        const std::size_t p = spec.names.size();
        double theta00 = theta[0];
        for (std::size_t i = 0; i < p; ++i) theta00 -= spec.shares[i] * theta[1 + i];
        double lin = theta00;
        for (std::size_t i = 0; i < p; ++i) lin += theta[1 + i] * spec.cells[cell][i];
        return std::exp(lin);
    }

    double drift_value(std::size_t cell, double x, std::span<const double> theta) const {
        if (!covariates) return drift.value(x, theta);
        const auto& spec = *covariates;
        const std::size_t p = spec.names.size();
        const std::size_t eta10_idx = 1 + p;
        double theta10 = theta[eta10_idx];
        for (std::size_t j = 0; j < spec.drift_covariates.size(); ++j)
            theta10 -= spec.shares[spec.drift_covariates[j]] * theta[eta10_idx + 1 + j];
        double lin = theta10;
        for (std::size_t j = 0; j < spec.drift_covariates.size(); ++j)
            lin += theta[eta10_idx + 1 + j] * spec.cells[cell][spec.drift_covariates[j]];
        const double theta2 = theta[theta.size() - 1];
        return std::exp(lin) * sign(x) * std::pow(std::abs(x), theta2);
    }
};

/// Drift theta*x with hazard |u|: for sigma=0 the dynamics collapse to
/// exponential hazard growth from x0.
inline ModelInstance gompertz_perturbation(GaussianPrior theta_prior, double sigma, double x0) {
    if (!(x0 > 0.0)) throw std::invalid_argument("gompertz_perturbation: x0 must be positive");
    ModelInstance m;
    m.name = "gompertz";
    m.drift = DriftSpec::linear({"theta"}, {[](double x) { return x; }});
    m.hazard = HazardSpec::absolute();
    m.prior.block = GaussianBlockPrior{{theta_prior.mean},
                                       Matrix::diagonal(std::vector<double>{1.0 / theta_prior.variance})};
    m.sigma = sigma;
    m.x0 = x0;
    m.prior.validate();
    return m;
}

/// Drift theta1 * sign(x) |x|^theta2 with hazard |u|. theta1 is conjugate
/// given theta2; theta2 lives on (0,1) and is updated by an independence
/// sampler (Beta(1/2,1/2) proposal by default).
inline ModelInstance weibull_perturbation(GaussianPrior theta1_prior, UniformPrior theta2_prior,
                                          double sigma, double x0) {
    if (!(x0 > 0.0)) throw std::invalid_argument("weibull_perturbation: x0 must be positive");
    if (theta2_prior.lo < 0.0 || theta2_prior.hi > 1.0 || !(theta2_prior.lo < theta2_prior.hi))
        throw std::invalid_argument("weibull_perturbation: theta2 support must lie within [0,1]");
    ModelInstance m;
    m.name = "weibull";
    m.drift = DriftSpec::conditionally_linear(
        {"theta1", "theta2"}, 1,
        [](double x, std::span<const double> nonlinear, std::span<double> out) {
            out[0] = sign(x) * std::pow(std::abs(x), nonlinear[0]);
        });
    m.hazard = HazardSpec::absolute();
    m.prior.block = GaussianBlockPrior{{theta1_prior.mean},
                                       Matrix::diagonal(std::vector<double>{1.0 / theta1_prior.variance})};
    m.prior.scalars = {theta2_prior};
    m.proposal_hints[0] = ProposalSpec::beta(0.5, 0.5);
    m.sigma = sigma;
    m.x0 = x0;
    m.prior.validate();
    return m;
}

/// Perturbation of the alpha/t hazard family, carried in unit-coefficient
/// coordinates y = log(x)/s (the original SDE has state-proportional noise).
/// There the drift is -(theta/s) e^{s y} - s/2, the hazard e^{s y} equals the
/// original state, and time starts at lambda.
inline ModelInstance pareto_perturbation(GaussianPrior theta_prior, double sigma_state,
                                         double x_lambda, double lambda) {
    if (!(x_lambda > 0.0) || !(lambda > 0.0) || !(sigma_state > 0.0))
        throw std::invalid_argument("pareto_perturbation: inputs must be positive");
    const double s = sigma_state;
    ModelInstance m;
    m.name = "pareto";
    m.drift = DriftSpec::conditionally_linear(
        {"theta"}, 1,
        [s](double y, std::span<const double>, std::span<double> out) {
            out[0] = -std::exp(s * y) / s;
        },
        [s](double, std::span<const double>) { return -0.5 * s; });
    m.hazard = HazardSpec::exp_scaled(s);
    m.prior.block = GaussianBlockPrior{{theta_prior.mean},
                                       Matrix::diagonal(std::vector<double>{1.0 / theta_prior.variance})};
    m.sigma = 1.0;  // unit coefficient after the transform
    const auto maps = lamperti_transform(
        linear_sigma(s),
        DriftSpec::general({"theta"}, [](double x, std::span<const double> theta) {
            return -theta[0] * x * x;
        }));
    m.state_forward = maps.forward;
    m.state_inverse = maps.inverse;
    m.x0 = maps.forward(x_lambda);
    m.time_origin = lambda;
    m.prior.validate();
    return m;
}

/// Reference two-parameter model: drift theta1 sin(x) + theta2, hazard u^2,
/// sigma 1, x0 2, Gaussian prior mean (-1.4, -1) with precision diag(1/5).
inline ModelInstance toy_model() {
    ModelInstance m;
    m.name = "toy";
    m.drift = DriftSpec::linear({"theta1", "theta2"},
                                {[](double x) { return std::sin(x); }, [](double) { return 1.0; }});
    m.hazard = HazardSpec::square();
    m.prior.block =
        GaussianBlockPrior{{-1.4, -1.0}, Matrix::diagonal(std::vector<double>{0.2, 0.2})};
    m.sigma = 1.0;
    m.x0 = 2.0;
    m.prior.validate();
    return m;
}

/// Covariate-dependent family around the |x|^theta2 drift: covariates shift
/// the (log) starting point and, optionally, the (log) drift scale. The
/// intercepts are stored centered so the coefficients stay decorrelated:
/// theta00 = eta00 - sum_i p_i theta0_i and theta10 = eta10 - sum_j p_j theta1_j
/// with p the sample shares frozen in the spec. All cells share one Brownian
/// motion, so this family runs under the fully non-centered parametrization.
inline ModelInstance build_covariate_model(CovariateModelSpec spec, GaussianPrior coef_prior,
                                           UniformPrior theta2_prior, double sigma) {
    if (theta2_prior.lo < 0.0 || theta2_prior.hi > 1.0 || !(theta2_prior.lo < theta2_prior.hi))
        throw std::invalid_argument("build_covariate_model: theta2 support must lie within [0,1]");
    ModelInstance m;
    m.name = "covariate_weibull";
    std::vector<std::string> names;
    names.push_back("eta00");
    for (const auto& nm : spec.names) names.push_back("theta0_" + nm);
    names.push_back("eta10");
    for (const std::size_t j : spec.drift_covariates) names.push_back("theta1_" + spec.names[j]);
    names.push_back("theta2");
    // the engine only needs drift_value/cell_x0; keep a same-dimension stub so
    // theta bookkeeping stays uniform
    m.drift = DriftSpec::general(names, [](double, std::span<const double>) { return 0.0; });
    m.hazard = HazardSpec::absolute();
    for (std::size_t i = 0; i + 1 < names.size(); ++i) m.prior.scalars.push_back(coef_prior);
    m.prior.scalars.push_back(theta2_prior);
    m.sigma = sigma;
    m.covariates = std::move(spec);
    m.prior.validate();
    return m;
}

/// Sum of the log prior densities of every parameter block; -inf outside the
/// support.
inline double log_prior(const ModelInstance& model, std::span<const double> theta,
                        std::optional<double> sigma_value = std::nullopt) {
    if (theta.size() != model.theta_dim())
        throw std::invalid_argument("log_prior: theta dimension mismatch");
    double acc = model.prior.log_density(theta);
    if (sigma_value) {
        if (model.sigma_mode != SigmaMode::Unknown)
            throw std::invalid_argument("log_prior: sigma value supplied for fixed-sigma model");
        acc += log_density(ScalarPrior{model.sigma_prior}, *sigma_value);
    }
    return acc;
}

}  // namespace diffsurv
