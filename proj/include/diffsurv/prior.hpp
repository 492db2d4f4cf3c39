#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "diffsurv/linalg.hpp"
#include "diffsurv/rng.hpp"

namespace diffsurv {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline const double kLog2Pi = std::log(2.0 * std::numbers::pi);

/// Joint Gaussian over a contiguous leading parameter block, stored as
/// (mean, precision).
struct GaussianBlockPrior {
    std::vector<double> mean;
    Matrix precision;

    void validate() const {
        if (mean.size() != precision.n)
            throw std::invalid_argument("GaussianBlockPrior: mean/precision size mismatch");
        cholesky(precision);  // must be SPD
    }

    double log_density(std::span<const double> theta) const {
        double quad = 0.0;
        for (std::size_t i = 0; i < mean.size(); ++i)
            for (std::size_t j = 0; j < mean.size(); ++j)
                quad += (theta[i] - mean[i]) * precision(i, j) * (theta[j] - mean[j]);
        const Matrix L = cholesky(precision);
        return -0.5 * quad + 0.5 * cholesky_logdet(L) -
               0.5 * static_cast<double>(mean.size()) * kLog2Pi;
    }

    std::vector<double> sample(Rng& rng) const {
        const Matrix L = cholesky(precision);
        std::vector<double> z(mean.size());
        for (auto& v : z) v = rng.gaussian();
        auto x = upper_solve(L, z);  // cov = (L L^T)^{-1}
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += mean[i];
        return x;
    }
};

struct GaussianPrior {
    double mean = 0.0;
    double variance = 1.0;
};
struct UniformPrior {
    double lo = 0.0;
    double hi = 1.0;
};
struct ExponentialPrior {
    double mean = 1.0;
};

using ScalarPrior = std::variant<GaussianPrior, UniformPrior, ExponentialPrior>;

inline void validate(const ScalarPrior& p) {
    if (const auto* g = std::get_if<GaussianPrior>(&p)) {
        if (!(g->variance > 0.0)) throw std::invalid_argument("Gaussian prior: variance <= 0");
    } else if (const auto* u = std::get_if<UniformPrior>(&p)) {
        if (!(u->lo < u->hi)) throw std::invalid_argument("Uniform prior: lo >= hi");
    } else if (const auto* e = std::get_if<ExponentialPrior>(&p)) {
        if (!(e->mean > 0.0)) throw std::invalid_argument("Exponential prior: mean <= 0");
    }
}

inline double log_density(const ScalarPrior& p, double x) {
    if (const auto* g = std::get_if<GaussianPrior>(&p)) {
        const double z = x - g->mean;
        return -0.5 * z * z / g->variance - 0.5 * std::log(g->variance) - 0.5 * kLog2Pi;
    }
    if (const auto* u = std::get_if<UniformPrior>(&p)) {
        if (x < u->lo || x > u->hi) return kNegInf;
        return -std::log(u->hi - u->lo);
    }
    const auto& e = std::get<ExponentialPrior>(p);
    if (x < 0.0) return kNegInf;
    return -x / e.mean - std::log(e.mean);
}

inline double sample(const ScalarPrior& p, Rng& rng) {
    if (const auto* g = std::get_if<GaussianPrior>(&p))
        return g->mean + std::sqrt(g->variance) * rng.gaussian();
    if (const auto* u = std::get_if<UniformPrior>(&p)) return rng.uniform_range(u->lo, u->hi);
    return rng.exponential(std::get<ExponentialPrior>(p).mean);
}

inline double mean_of(const ScalarPrior& p) {
    if (const auto* g = std::get_if<GaussianPrior>(&p)) return g->mean;
    if (const auto* u = std::get_if<UniformPrior>(&p)) return 0.5 * (u->lo + u->hi);
    return std::get<ExponentialPrior>(p).mean;
}

/// Prior over the full theta vector: an optional joint Gaussian block over
/// the leading coefficients plus independent scalar priors for the rest.
struct PriorSpec {
    std::optional<GaussianBlockPrior> block;
    std::vector<ScalarPrior> scalars;

    std::size_t dim() const { return (block ? block->mean.size() : 0) + scalars.size(); }
    std::size_t block_dim() const { return block ? block->mean.size() : 0; }

    void validate() const {
        if (block) block->validate();
        for (const auto& s : scalars) diffsurv::validate(s);
    }

    double log_density(std::span<const double> theta) const {
        if (theta.size() != dim()) throw std::invalid_argument("PriorSpec: dimension mismatch");
        double acc = 0.0;
        std::size_t off = 0;
        if (block) {
            acc += block->log_density(theta.subspan(0, block->mean.size()));
            off = block->mean.size();
        }
        for (std::size_t i = 0; i < scalars.size(); ++i)
            acc += diffsurv::log_density(scalars[i], theta[off + i]);
        return acc;
    }

    std::vector<double> sample(Rng& rng) const {
        std::vector<double> theta;
        theta.reserve(dim());
        if (block) theta = block->sample(rng);
        for (const auto& s : scalars) theta.push_back(diffsurv::sample(s, rng));
        return theta;
    }

    std::vector<double> mean() const {
        std::vector<double> m;
        m.reserve(dim());
        if (block) m = block->mean;
        for (const auto& s : scalars) m.push_back(mean_of(s));
        return m;
    }
};

}  // namespace diffsurv
