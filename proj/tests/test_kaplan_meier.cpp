#include <doctest.h>

#include <cmath>
#include <vector>

#include "diffsurv/io.hpp"
#include "diffsurv/kaplan_meier.hpp"

using namespace diffsurv;

TEST_CASE("kaplan_meier: no censoring equals one minus the empirical CDF") {
    std::vector<Observation> obs;
    const std::vector<double> times{0.5, 1.0, 1.0, 2.0, 3.5};
    for (const double t : times) obs.push_back({t, true, "", {}});
    const auto km = kaplan_meier(obs);
    for (const double t : {0.4, 0.5, 0.9, 1.0, 1.5, 2.0, 3.0, 3.5, 4.0}) {
        double ecdf = 0.0;
        for (const double y : times) ecdf += y <= t ? 1.0 : 0.0;
        ecdf /= static_cast<double>(times.size());
        CHECK(km.at(t) == doctest::Approx(1.0 - ecdf).epsilon(1e-15));
    }
}

TEST_CASE("kaplan_meier: censoring at an event time stays in the risk set") {
    // deaths processed before censorings at equal times
    std::vector<Observation> obs{{1.0, true, "", {}}, {1.0, false, "", {}}, {2.0, true, "", {}}};
    const auto km = kaplan_meier(obs);
    REQUIRE(km.times.size() == 2);
    CHECK(km.values[0] == doctest::Approx(2.0 / 3.0));
    CHECK(km.values[1] == doctest::Approx(0.0));
}

TEST_CASE("kaplan_meier: treated-arm product-limit values by hand") {
    const auto data = embedded_leukemia_weeks();
    const auto km = kaplan_meier(data.group("6-MP"));
    // hand product-limit: steps at 6,7,10,13,16,22,23
    const std::vector<double> step_times{6, 7, 10, 13, 16, 22, 23};
    REQUIRE(km.times == step_times);
    const double s6 = 18.0 / 21.0;
    const double s7 = s6 * 16.0 / 17.0;
    const double s10 = s7 * 14.0 / 15.0;
    const double s13 = s10 * 11.0 / 12.0;
    const double s16 = s13 * 10.0 / 11.0;
    const double s22 = s16 * 6.0 / 7.0;
    const double s23 = s22 * 5.0 / 6.0;
    const std::vector<double> want{s6, s7, s10, s13, s16, s22, s23};
    for (std::size_t k = 0; k < want.size(); ++k)
        CHECK(std::abs(km.values[k] - want[k]) < 1e-12);
    CHECK(std::abs(km.at(6.0) - (1.0 - 3.0 / 21.0)) < 1e-12);
}

TEST_CASE("kaplan_meier: placebo arm is fully observed") {
    const auto data = embedded_leukemia_weeks();
    const auto obs = data.group("placebo");
    for (const auto& o : obs) CHECK(o.event);
    const auto km = kaplan_meier(obs);
    CHECK(std::abs(km.at(8.0) - 8.0 / 21.0) < 1e-12);
    CHECK(km.at(23.0) == 0.0);
}

TEST_CASE("kaplan_meier: S(0) = 1 and nonincreasing") {
    const auto data = embedded_leukemia();
    const auto km = kaplan_meier(data);
    CHECK(km.at(0.0) == 1.0);
    double prev = 1.0;
    for (const double v : km.values) {
        CHECK(v <= prev);
        prev = v;
    }
}

TEST_CASE("kaplan_meier: empty input rejected") {
    CHECK_THROWS_AS(kaplan_meier(std::span<const Observation>{}), std::invalid_argument);
}
