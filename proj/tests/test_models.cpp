#include <doctest.h>

#include <cmath>
#include <vector>

#include "diffsurv/brownian.hpp"
#include "diffsurv/euler.hpp"
#include "diffsurv/io.hpp"
#include "diffsurv/model.hpp"
#include "diffsurv/survival.hpp"

using namespace diffsurv;

TEST_CASE("gompertz model: structure and degenerate dynamics") {
    const auto m = gompertz_perturbation(GaussianPrior{0.0, 5.0}, 0.5, 1.0);
    CHECK(m.drift.linear_count() == 1);
    CHECK(m.has_conjugate_block());
    CHECK(m.drift.value(0.0, std::vector<double>{2.0}) == 0.0);
    CHECK_THROWS_AS(gompertz_perturbation(GaussianPrior{0.0, 5.0}, 0.5, -1.0),
                    std::invalid_argument);

    // sigma = 0, theta = alpha: hazard |x_t| tracks x0 * exp(alpha t) within
    // first-order Euler error that halves with dt
    const double alpha = 0.8, x0 = 1.2, T = 1.0;
    auto err = [&](double dt) {
        const auto g = make_grid(0.0, T, dt);
        const NoiseIncrements z{g, std::vector<double>(g.size() - 1, 0.0)};
        const auto p =
            euler_maruyama_simulate(m.drift, std::vector<double>{alpha}, 0.0, x0, g, z);
        const auto hz = hazard_curve(p, m.hazard);
        double e = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k)
            e = std::max(e, std::abs(hz.values[k] - x0 * std::exp(alpha * g[k])));
        return e;
    };
    CHECK(err(0.01) / err(0.005) == doctest::Approx(2.0).epsilon(0.05));

    // theta = 0, sigma = 0: constant hazard x0
    const auto g = make_grid(0.0, 1.0, 0.1);
    const NoiseIncrements z{g, std::vector<double>(g.size() - 1, 0.0)};
    const auto p = euler_maruyama_simulate(m.drift, std::vector<double>{0.0}, 0.0, x0, g, z);
    for (const double v : p.values) CHECK(v == x0);
}

TEST_CASE("weibull model: drift basis and parameter validation") {
    const auto m = weibull_perturbation(GaussianPrior{0.0, 5.0}, UniformPrior{0.0, 1.0}, 8.0, 0.8);
    CHECK(m.drift.linear_count() == 1);
    CHECK(m.prior.scalars.size() == 1);
    CHECK(m.proposal_hints.at(0).kind == ProposalSpec::Kind::Beta);

    // sign(0)|0|^t2 = 0
    CHECK(m.drift.value(0.0, std::vector<double>{1.5, 0.5}) == 0.0);
    // theta2 = 1 reduces to the linear drift theta1 * x
    for (const double x : {-2.0, -0.3, 0.7, 3.0})
        CHECK(m.drift.value(x, std::vector<double>{1.5, 1.0}) ==
              doctest::Approx(1.5 * x).epsilon(1e-12));
    CHECK_THROWS_AS(
        weibull_perturbation(GaussianPrior{0.0, 5.0}, UniformPrior{-0.5, 1.0}, 8.0, 0.8),
        std::invalid_argument);
}

TEST_CASE("linear-basis drift evaluates exactly as the dot product") {
    const auto m = toy_model();
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const double x = 4.0 * rng.gaussian();
        const std::vector<double> theta{rng.gaussian(), rng.gaussian()};
        double basis[2];
        m.drift.eval_basis(x, {}, basis);
        const double by_hand = theta[0] * basis[0] + theta[1] * basis[1];
        CHECK(m.drift.value(x, theta) == by_hand);  // same dot product: bit-exact
    }
}

TEST_CASE("toy model: configuration") {
    const auto m = toy_model();
    CHECK(m.sigma == 1.0);
    CHECK(m.x0 == 2.0);
    REQUIRE(m.prior.block.has_value());
    CHECK(m.prior.block->mean == std::vector<double>{-1.4, -1.0});
    CHECK(m.prior.block->precision(0, 0) == doctest::Approx(0.2));
    CHECK(m.prior.block->precision(1, 1) == doctest::Approx(0.2));
    CHECK(m.prior.block->precision(0, 1) == 0.0);
    double basis[2];
    m.drift.eval_basis(0.0, {}, basis);
    CHECK(basis[0] == 0.0);
    CHECK(basis[1] == 1.0);
}

TEST_CASE("pareto model: transformed coordinates") {
    const double s = 8.0, x_lambda = 0.8, lambda = 0.3;
    const auto m = pareto_perturbation(GaussianPrior{0.0, 5.0}, s, x_lambda, lambda);
    CHECK(m.sigma == 1.0);
    CHECK(m.time_origin == lambda);
    CHECK(m.x0 == doctest::Approx(std::log(x_lambda) / s).epsilon(1e-14));
    // hazard in transformed coordinates equals the original state
    for (const double x : {0.1, 0.8, 2.0, 11.0})
        CHECK(m.hazard(m.state_forward(x)) == doctest::Approx(x).epsilon(1e-12));
    // engine drift (basis + offset form) agrees with the generic transform
    const auto tr = lamperti_transform(
        linear_sigma(s), DriftSpec::general({"theta"}, [](double x, std::span<const double> th) {
            return -th[0] * x * x;
        }));
    const std::vector<double> theta{0.4};
    for (const double y : {-0.3, -0.1, 0.0, 0.05})
        CHECK(m.drift.value(y, theta) ==
              doctest::Approx(tr.transformed_drift.value(y, theta)).epsilon(1e-12));
    CHECK_THROWS_AS(pareto_perturbation(GaussianPrior{0.0, 5.0}, 0.0, 1.0, 1.0),
                    std::invalid_argument);
}

TEST_CASE("pareto model: small-noise hazard tracks the alpha/t decay") {
    // theta = 1/alpha; mean simulated hazard within 10% of alpha/t on [lambda, 2*lambda]
    const double alpha = 2.0, lambda = 1.0, s = 0.05;
    const auto m = pareto_perturbation(GaussianPrior{1.0 / alpha, 1.0}, s, alpha / lambda, lambda);
    const auto g = make_grid(lambda, 2.0 * lambda, 1e-3);
    const std::vector<double> theta{1.0 / alpha};
    Rng rng(2025);
    const std::size_t n_paths = 200;
    std::vector<double> mean_h(g.size(), 0.0);
    for (std::size_t i = 0; i < n_paths; ++i) {
        const auto noise = sample_noise(g, rng);
        const auto p = euler_maruyama_simulate(m.drift, theta, 1.0, m.x0, g, noise);
        for (std::size_t k = 0; k < g.size(); ++k) mean_h[k] += m.hazard(p.values[k]);
    }
    for (std::size_t k = 0; k < g.size(); ++k) {
        mean_h[k] /= static_cast<double>(n_paths);
        const double want = alpha / g[k];
        CHECK(std::abs(mean_h[k] - want) / want < 0.10);
    }
}

TEST_CASE("covariate model: reparametrized intercepts and cell dispatch") {
    SurvivalDataset data;
    data.covariate_names = {"F", "H"};
    for (int i = 0; i < 4; ++i) data.observations.push_back({1.0, true, "", {0.0, 0.0}});
    for (int i = 0; i < 2; ++i) data.observations.push_back({1.0, true, "", {1.0, 0.0}});
    for (int i = 0; i < 2; ++i) data.observations.push_back({1.0, true, "", {0.0, 1.0}});
    data.observations.push_back({1.0, true, "", {1.0, 1.0}});
    const auto spec = CovariateModelSpec::from_dataset(data, {0});
    CHECK(spec.cells.size() == 4);
    CHECK(spec.shares[0] == doctest::Approx(3.0 / 9.0));  // share of F = 1
    CHECK(spec.shares[1] == doctest::Approx(3.0 / 9.0));

    const auto m = build_covariate_model(spec, GaussianPrior{0.0, 5.0}, UniformPrior{0.0, 1.0}, 8.0);
    CHECK(m.theta_dim() == 6);  // eta00, theta0_F, theta0_H, eta10, theta1_F, theta2
    CHECK(!m.has_conjugate_block());

    // theta02 = ln 2 doubles the starting point of the H=1 cells
    std::vector<double> theta{0.1, 0.3, std::log(2.0), 0.0, 0.2, 0.5};
    const auto cell_of = [&](double F, double H) {
        return m.covariates->cell_of(std::vector<double>{F, H});
    };
    const double ratio = m.cell_x0(cell_of(0, 1), theta) / m.cell_x0(cell_of(0, 0), theta);
    CHECK(ratio == doctest::Approx(2.0).epsilon(1e-12));

    // centered intercepts: theta00 = eta00 - pF*theta01 - pH*theta02
    const double theta00 = theta[0] - spec.shares[0] * theta[1] - spec.shares[1] * theta[2];
    CHECK(m.cell_x0(cell_of(0, 0), theta) == doctest::Approx(std::exp(theta00)).epsilon(1e-12));

    // drift scale: exp(theta10 + theta11 F) sign(x)|x|^theta2
    const double theta10 = theta[3] - spec.shares[0] * theta[4];
    const double x = 1.7;
    CHECK(m.drift_value(cell_of(1, 0), x, theta) ==
          doctest::Approx(std::exp(theta10 + theta[4]) * std::pow(x, theta[5])).epsilon(1e-12));

    CHECK_THROWS_AS(m.covariates->cell_of(std::vector<double>{2.0, 0.0}), std::invalid_argument);
}

TEST_CASE("covariate model with a single cell matches the plain drift family") {
    SurvivalDataset data;
    data.covariate_names = {"Z"};
    for (int i = 0; i < 5; ++i) data.observations.push_back({0.5 + 0.1 * i, true, "", {1.0}});
    const auto spec = CovariateModelSpec::from_dataset(data, {});
    REQUIRE(spec.cells.size() == 1);
    const auto cov = build_covariate_model(spec, GaussianPrior{0.0, 5.0}, UniformPrior{0, 1}, 2.0);
    const double theta1 = 1.3, theta2 = 0.6, x0 = 0.8;
    // with a single cell, z equals the share, so the centered intercept is the
    // whole (log) starting point whatever theta0 is
    const std::vector<double> theta{std::log(x0), 0.7, std::log(theta1), theta2};
    const auto plain =
        weibull_perturbation(GaussianPrior{0.0, 5.0}, UniformPrior{0, 1}, 2.0, x0);
    const std::vector<double> plain_theta{theta1, theta2};
    CHECK(cov.cell_x0(0, theta) == doctest::Approx(x0).epsilon(1e-12));
    for (const double x : {-1.0, 0.2, 0.8, 2.5})
        CHECK(cov.drift_value(0, x, theta) ==
              doctest::Approx(plain.drift.value(x, plain_theta)).epsilon(1e-12));
}

TEST_CASE("log_prior: support boundaries and analytic values") {
    const auto m = weibull_perturbation(GaussianPrior{0.0, 1.0}, UniformPrior{0.0, 1.0}, 1.0, 1.0);
    // uniform inside support contributes log 1 = 0, so total = standard normal at 0
    CHECK(log_prior(m, std::vector<double>{0.0, 0.5}) ==
          doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-12));
    CHECK(log_prior(m, std::vector<double>{0.0, 1.5}) == kNegInf);
    CHECK_THROWS_AS(log_prior(m, std::vector<double>{0.0}), std::invalid_argument);

    auto m2 = m;
    m2.sigma_mode = SigmaMode::Unknown;
    m2.sigma_prior = ExponentialPrior{2.0};
    CHECK(log_prior(m2, std::vector<double>{0.0, 0.5}, 1.0) ==
          doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi) - 0.5 - std::log(2.0))
              .epsilon(1e-12));
    CHECK_THROWS_AS(log_prior(m, std::vector<double>{0.0, 0.5}, 1.0), std::invalid_argument);
}

TEST_CASE("prior spec: finite exactly on the product of supports") {
    PriorSpec prior;
    prior.block = GaussianBlockPrior{{0.0}, Matrix::identity(1)};
    prior.scalars = {UniformPrior{0.0, 1.0}, ExponentialPrior{1.0}};
    CHECK(std::isfinite(prior.log_density(std::vector<double>{5.0, 0.5, 2.0})));
    CHECK(prior.log_density(std::vector<double>{5.0, -0.1, 2.0}) == kNegInf);
    CHECK(prior.log_density(std::vector<double>{5.0, 0.5, -2.0}) == kNegInf);
}
