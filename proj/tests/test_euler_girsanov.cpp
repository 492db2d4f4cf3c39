#include <doctest.h>

#include <cmath>
#include <vector>

#include "diffsurv/brownian.hpp"
#include "diffsurv/drift.hpp"
#include "diffsurv/euler.hpp"
#include "diffsurv/girsanov.hpp"
#include "diffsurv/time_grid.hpp"
#include "helpers.hpp"

using namespace diffsurv;

namespace {

DriftSpec linear_drift() {
    return DriftSpec::linear({"theta"}, {[](double x) { return x; }});
}

NoiseIncrements zero_noise(const TimeGrid& g) {
    return NoiseIncrements{g, std::vector<double>(g.size() - 1, 0.0)};
}

/// Exact log transition density of dX = theta X dt + sigma dB.
double ou_log_transition(double x_next, double x, double theta, double sigma, double dt) {
    const double mean = x * std::exp(theta * dt);
    const double var = sigma * sigma * (std::exp(2.0 * theta * dt) - 1.0) / (2.0 * theta);
    const double z = x_next - mean;
    return -0.5 * z * z / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
}

double bm_log_transition(double x_next, double x, double sigma, double dt) {
    const double var = sigma * sigma * dt;
    const double z = x_next - x;
    return -0.5 * z * z / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
}

}  // namespace

TEST_CASE("euler: deterministic recursion with linear drift") {
    const auto g = make_grid(0.0, 1.0, 0.1);
    const std::vector<double> theta{0.5};
    const auto p = euler_maruyama_simulate(linear_drift(), theta, 0.0, 1.0, g, zero_noise(g));
    for (std::size_t k = 0; k < g.size(); ++k)
        CHECK(p.values[k] ==
              doctest::Approx(std::pow(1.0 + 0.05, static_cast<double>(k))).epsilon(1e-12));
}

TEST_CASE("euler: zero drift reduces to the driving noise") {
    Rng rng(3);
    const auto g = make_grid(0.0, 1.0, 0.05);
    const auto noise = sample_noise(g, rng);
    const auto p = euler_maruyama_simulate(DriftSpec::none(), {}, 2.0, 0.5, g, noise);
    double x = 0.5;
    for (std::size_t k = 0; k + 1 < g.size(); ++k) {
        x += 2.0 * noise.increments[k];
        CHECK(p.values[k + 1] == doctest::Approx(x).epsilon(1e-14));
    }
}

TEST_CASE("euler: noise grid mismatch is rejected") {
    const auto g = make_grid(0.0, 1.0, 0.1);
    const auto g2 = make_grid(0.0, 1.0, 0.2);
    CHECK_THROWS_AS(
        euler_maruyama_simulate(linear_drift(), std::vector<double>{0.5}, 1.0, 1.0, g,
                                zero_noise(g2)),
        std::invalid_argument);
}

TEST_CASE("euler: explosive drift fails loudly") {
    // dX = X^2 dt from a large start blows past double range within the grid
    const auto drift = DriftSpec::general({"a"}, [](double x, std::span<const double>) {
        return std::exp(x);
    });
    const auto g = make_grid(0.0, 10.0, 0.5);
    CHECK_THROWS_AS(
        euler_maruyama_simulate(drift, std::vector<double>{1.0}, 0.0, 5.0, g, zero_noise(g)),
        std::runtime_error);
}

TEST_CASE("euler: sigma=0 exponential-growth drift halves its error with dt") {
    // drift theta*x with sigma=0 integrates dx/dt = theta x; first-order error
    const double theta = 0.7, x0 = 1.3, T = 1.0;
    auto bias = [&](double dt) {
        const auto g = make_grid(0.0, T, dt);
        const auto p = euler_maruyama_simulate(linear_drift(), std::vector<double>{theta}, 0.0,
                                               x0, g, zero_noise(g));
        return std::abs(p.values.back() - x0 * std::exp(theta * T));
    };
    const double e1 = bias(0.01), e2 = bias(0.005);
    CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("euler: weak order one for the linear-drift mean over many paths") {
    const double theta = 0.5, sigma = 0.2, x0 = 1.0, T = 1.0;
    const std::size_t n_paths = 200000;
    auto mean_bias = [&](double dt, std::uint64_t seed) {
        Rng rng(seed);
        const auto g = make_grid(0.0, T, dt);
        double acc = 0.0;
        for (std::size_t i = 0; i < n_paths; ++i) {
            const auto noise = sample_noise(g, rng);
            const auto p = euler_maruyama_simulate(linear_drift(), std::vector<double>{theta},
                                                   sigma, x0, g, noise);
            acc += p.values.back();
        }
        return std::abs(acc / static_cast<double>(n_paths) - x0 * std::exp(theta * T));
    };
    const double b1 = mean_bias(0.1, 21);
    const double b2 = mean_bias(0.05, 22);
    CHECK(b2 < b1);
    CHECK(b1 / b2 == doctest::Approx(2.0).epsilon(0.35));
}

TEST_CASE("girsanov: zero drift gives zero log-density") {
    Rng rng(8);
    const auto g = make_grid(0.0, 1.0, 0.1);
    const auto p = sample_brownian_path(g, 1.0, 0.0, rng);
    CHECK(girsanov_logdensity(p, linear_drift(), std::vector<double>{0.0}, 1.0, 0.0, 1.0) == 0.0);
}

TEST_CASE("girsanov: constant drift analytic value") {
    // beta = 1, sigma = 1, window [0,1], x(1)-x(0) = 0.5 -> 0.5 - 0.5 = 0
    const auto drift = DriftSpec::linear({"c"}, {[](double) { return 1.0; }});
    const auto g = make_grid(0.0, 1.0, 0.25);
    DiffusionPath p{g, {0.0, 0.9, -0.2, 0.4, 0.5}};
    CHECK(girsanov_logdensity(p, drift, std::vector<double>{1.0}, 1.0, 0.0, 1.0) ==
          doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("girsanov: additivity across a split point") {
    Rng rng(31);
    const auto g = make_grid(0.0, 1.0, 0.01);
    const auto p = sample_brownian_path(g, 1.5, 0.7, rng);
    const std::vector<double> theta{0.8};
    const double whole = girsanov_logdensity(p, linear_drift(), theta, 1.5, 0.0, 1.0);
    const double left = girsanov_logdensity(p, linear_drift(), theta, 1.5, 0.0, 0.42);
    const double right = girsanov_logdensity(p, linear_drift(), theta, 1.5, 0.42, 1.0);
    CHECK(whole == doctest::Approx(left + right).epsilon(1e-12));
}

TEST_CASE("girsanov: matches the exact transition-density ratio on a fine grid") {
    const double theta = 0.5, sigma = 1.0, dt = 1e-4, T = 1.0;
    const auto g = make_grid(0.0, T, dt);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(1000 + seed);
        const auto p = sample_brownian_path(g, sigma, 1.0, rng);
        const double approx =
            girsanov_logdensity(p, linear_drift(), std::vector<double>{theta}, sigma, 0.0, T);
        double exact = 0.0;
        for (std::size_t k = 0; k + 1 < g.size(); ++k)
            exact += ou_log_transition(p.values[k + 1], p.values[k], theta, sigma, g.dt(k)) -
                     bm_log_transition(p.values[k + 1], p.values[k], sigma, g.dt(k));
        // relative error of the density ratio: |exp(approx - exact) - 1| < 1%
        CHECK(std::abs(std::exp(approx - exact) - 1.0) < 0.01);
    }
}

TEST_CASE("girsanov: window endpoints must be nodes") {
    const auto g = make_grid(0.0, 1.0, 0.25);
    DiffusionPath p{g, {0.0, 0.1, 0.2, 0.3, 0.4}};
    CHECK_THROWS_AS(
        girsanov_logdensity(p, linear_drift(), std::vector<double>{1.0}, 1.0, 0.0, 0.3),
        std::invalid_argument);
    CHECK_THROWS_AS(
        girsanov_logdensity(p, linear_drift(), std::vector<double>{1.0}, 0.0, 0.0, 1.0),
        std::invalid_argument);
}
