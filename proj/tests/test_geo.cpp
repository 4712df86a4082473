#include "techdiff/errors.hpp"
#include "techdiff/geo.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace techdiff;

TEST_CASE("haversine matches great-circle arithmetic") {
    CHECK(haversine({0.0, 0.0}, {0.0, 180.0}) == doctest::Approx(std::numbers::pi * 6371.0).epsilon(1e-12));
    CHECK(haversine({0.0, 0.0}, {0.0, 180.0}) == doctest::Approx(20015.09).epsilon(1e-6));
    CHECK(haversine({10.0, 5.0}, {11.0, 5.0}) == doctest::Approx(111.195).epsilon(1e-5));
    CHECK(haversine({37.0, -122.0}, {37.0, -122.0}) == 0.0);
}

TEST_CASE("haversine is symmetric") {
    const GeoPoint a{40.7, -74.0}, b{34.05, -118.24};
    CHECK(haversine(a, b) == doctest::Approx(haversine(b, a)).epsilon(1e-15));
    CHECK(haversine(a, b) == doctest::Approx(3935.7).epsilon(1e-3));
}

TEST_CASE("coordinates are validated") {
    CHECK_THROWS_AS(validate({91.0, 0.0}), DomainError);
    CHECK_THROWS_AS(validate({0.0, -181.0}), DomainError);
    CHECK_THROWS_AS(validate({std::nan(""), 0.0}), DomainError);
    CHECK_NOTHROW(validate({-90.0, 180.0}));
}

TEST_CASE("distance matrix is symmetric with a zero diagonal") {
    FirmTable firms;
    firms.ids = {1, 2, 3};
    firms.coords = {{35.0, -100.0}, {36.0, -101.0}, {40.0, -90.0}};
    const auto dm = distance_matrix(firms);
    for (int i = 0; i < 3; ++i) {
        CHECK(dm(i, i) == 0.0);
        for (int j = 0; j < 3; ++j)
            CHECK(dm(i, j) == doctest::Approx(haversine(firms.coords[static_cast<std::size_t>(i)],
                                                        firms.coords[static_cast<std::size_t>(j)])));
    }
    const auto planar = distance_matrix(firms, DistanceKernel::EuclideanProjection);
    CHECK(planar(0, 1) == doctest::Approx(dm(0, 1)).epsilon(0.01));
}

TEST_CASE("nearest adopter distance uses the previous year's adopters") {
    FirmTable firms;
    firms.ids = {1, 2, 3};
    firms.coords = {{0.0, 0.0}, {0.0, 1.0}, {0.0, 3.0}};
    const auto dm = distance_matrix(firms);
    AdoptionPanel panel(3, 2010, 2011, {"AI"});
    panel.set(0, 2010, 0, true);
    panel.set(0, 2011, 0, true);
    panel.set(0, 2011, 1, true);
    const auto prev = nearest_adopter_distance(panel, dm, 0, 2011);
    REQUIRE(prev.has_value());
    REQUIRE(prev->firms.size() == 1);
    CHECK(prev->firms[0] == 2);
    CHECK(prev->km[0] == doctest::Approx(dm(0, 2)));
    const auto same = nearest_adopter_distance(panel, dm, 0, 2011, AdopterReference::SameYear);
    CHECK(same->km[0] == doctest::Approx(dm(1, 2)));
    CHECK_THROWS_AS(nearest_adopter_distance(panel, dm, 0, 2010), InputError);
}

TEST_CASE("distance to a set includes the members themselves") {
    Eigen::MatrixXd dm(3, 3);
    dm << 0, 5, 9, 5, 0, 4, 9, 4, 0;
    const std::vector<std::uint8_t> flagged{0, 1, 0};
    const auto d = distance_to_set(dm, flagged);
    CHECK(d[0] == 5.0);
    CHECK(d[1] == 0.0);
    CHECK(d[2] == 4.0);
    const std::vector<std::uint8_t> none{0, 0, 0};
    CHECK(std::isinf(distance_to_set(dm, none)[0]));
}
