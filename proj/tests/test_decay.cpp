#include "techdiff/decay.hpp"
#include "techdiff/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace techdiff;

namespace {

DecayCurve exact_curve(double u0, double kappa) {
    DecayCurve c;
    for (int k = 0; k < 20; ++k) {
        const double d = 2.5 + 5.0 * k;
        c.bins.push_back({d, u0 * std::exp(-kappa * d), 100});
    }
    return c;
}

}  // namespace

TEST_CASE("spatial boundary reproduces the published distances") {
    CHECK(spatial_boundary(0.0435, 0.05) == doctest::Approx(68.9).epsilon(0.05 / 68.9));
    CHECK(spatial_boundary(0.0435, 0.01) == doctest::Approx(105.9).epsilon(0.05 / 105.9));
    CHECK_THROWS_AS(spatial_boundary(0.0, 0.05), DomainError);
    CHECK_THROWS_AS(spatial_boundary(0.04, 1.5), DomainError);
}

TEST_CASE("exact exponential data is recovered") {
    const auto fit = fit_exponential(exact_curve(0.3, 0.0435), 0.05);
    CHECK(fit.rate == doctest::Approx(0.0435).epsilon(1e-10));
    CHECK(fit.u0 == doctest::Approx(0.3).epsilon(1e-10));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.d_star == doctest::Approx(-std::log(0.05) / 0.0435).epsilon(1e-10));
}

TEST_CASE("zero-rate bins are dropped from log fits") {
    auto c = exact_curve(0.2, 0.05);
    c.bins[5].rate = 0.0;
    const auto fit = fit_exponential(c);
    CHECK(fit.bins_dropped == 1);
    CHECK(fit.bins_used == 19);
    CHECK(fit.rate == doctest::Approx(0.05).epsilon(1e-10));
}

TEST_CASE("exponential data ranks the exponential form first") {
    const auto alt = fit_alternatives(exact_curve(0.3, 0.04));
    CHECK(alt.best == DecayForm::Exponential);
    CHECK(alt.exponential.r_squared > alt.power.r_squared);
    CHECK(alt.exponential.r_squared > alt.linear.r_squared);
}

TEST_CASE("binning averages outcomes and honours the cap") {
    const std::vector<double> d{1.0, 2.0, 6.0, 7.0, 8.0, 120.0};
    const std::vector<double> y{1.0, 0.0, 1.0, 1.0, 0.0, 1.0};
    const auto c = bin_adoption_by_distance(d, y, 5.0, 100.0);
    REQUIRE(c.bins.size() == 2);
    CHECK(c.bins[0].distance == doctest::Approx(2.5));
    CHECK(c.bins[0].rate == doctest::Approx(0.5));
    CHECK(c.bins[0].count == 2);
    CHECK(c.bins[1].rate == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("flat or rising curves are not read as decay") {
    DecayCurve c;
    for (int k = 0; k < 5; ++k)
        c.bins.push_back({2.5 + 5.0 * k, 0.1 + 0.01 * k, 50});
    CHECK_THROWS_AS(fit_exponential(c), EstimationError);
    DecayCurve tiny;
    tiny.bins = {{1.0, 0.5, 10}, {2.0, 0.4, 10}};
    CHECK_THROWS_AS(fit_exponential(tiny), InputError);
}

TEST_CASE("pooled hazard sample uses firms at risk") {
    FirmTable firms;
    firms.ids = {1, 2, 3};
    firms.coords = {{0.0, 0.0}, {0.0, 0.1}, {0.0, 0.5}};
    const auto dm = distance_matrix(firms);
    AdoptionPanel panel(3, 2010, 2011, {"AI"});
    panel.set(0, 2010, 0, true);
    panel.set(0, 2011, 0, true);
    panel.set(0, 2011, 1, true);
    const auto hs = pooled_hazard_sample(panel, dm, 0, 2010, 2011);
    REQUIRE(hs.km.size() == 2);
    CHECK(hs.km[0] == doctest::Approx(dm(0, 1)));
    CHECK(hs.adopted[0] == 1.0);
    CHECK(hs.adopted[1] == 0.0);
}
