#include "techdiff/bootstrap.hpp"
#include "techdiff/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

using namespace techdiff;

namespace {

struct Sample {
    std::vector<double> x;
};

std::size_t firm_count(const Sample& s) { return s.x.size(); }

Sample resample_firms(const Sample& s, std::span<const std::size_t> idx) {
    Sample out;
    for (auto i : idx)
        out.x.push_back(s.x[i]);
    return out;
}

double mean(const Sample& s) { return std::accumulate(s.x.begin(), s.x.end(), 0.0) / static_cast<double>(s.x.size()); }

Sample normal_sample(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Sample s;
    for (std::size_t i = 0; i < n; ++i)
        s.x.push_back(z(rng));
    return s;
}

}  // namespace

TEST_CASE("nearest-rank percentiles") {
    const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(nearest_rank(v, 0.025) == 1.0);
    CHECK(nearest_rank(v, 0.25) == 3.0);
    CHECK(nearest_rank(v, 0.5) == 5.0);
    CHECK(nearest_rank(v, 0.975) == 10.0);
    CHECK(nearest_rank(v, 0.0) == 1.0);
    CHECK(nearest_rank(v, 1.0) == 10.0);
    std::vector<double> thousand(1000);
    std::iota(thousand.begin(), thousand.end(), 1.0);
    CHECK(nearest_rank(thousand, 0.025) == 25.0);
    CHECK(nearest_rank(thousand, 0.975) == 975.0);
}

TEST_CASE("a constant statistic gives a degenerate interval") {
    const auto s = normal_sample(50, 1);
    const auto res = cluster_bootstrap(s, [](const Sample&) { return 3.25; }, {200, 9});
    CHECK(res.point == 3.25);
    CHECK(res.ci_low == 3.25);
    CHECK(res.ci_high == 3.25);
    CHECK(res.failed == 0);
}

TEST_CASE("percentile interval of a normal mean has the analytic width") {
    const auto s = normal_sample(200, 2);
    const auto res = cluster_bootstrap(s, mean, {1000, 42});
    const double width = res.ci_high - res.ci_low;
    CHECK(width == doctest::Approx(2.0 * 1.96 / std::sqrt(200.0)).epsilon(0.2));
    CHECK(res.ci_low <= res.point);
    CHECK(res.point <= res.ci_high);
}

TEST_CASE("bootstrap is deterministic given its seed") {
    const auto s = normal_sample(80, 3);
    const auto a = cluster_bootstrap(s, mean, {150, 5});
    const auto b = cluster_bootstrap(s, mean, {150, 5});
    CHECK(a.draws == b.draws);
    const auto c = cluster_bootstrap(s, mean, {150, 6});
    CHECK(a.draws != c.draws);
    CHECK(resample_indices(10, 5, 3) == resample_indices(10, 5, 3));
}

TEST_CASE("widening the level never narrows the interval") {
    const auto s = normal_sample(100, 4);
    BootstrapOptions narrow{400, 8, 0.8}, wide{400, 8, 0.95};
    const auto a = cluster_bootstrap(s, mean, narrow);
    const auto b = cluster_bootstrap(s, mean, wide);
    CHECK(b.ci_low <= a.ci_low);
    CHECK(b.ci_high >= a.ci_high);
}

TEST_CASE("replicate failures are tolerated up to the limit") {
    const auto s = normal_sample(60, 5);
    int calls = 0;
    auto flaky = [&](const Sample& x) {
        if (calls++ % 50 == 49)
            throw EstimationError("singular");
        return mean(x);
    };
    const auto res = cluster_bootstrap(s, flaky, {200, 1});
    CHECK(res.failed == 4);
    CHECK(res.draws.size() == 196);

    auto broken = [](const Sample& x) -> double {
        if (x.x.size() > 0)
            throw EstimationError("always fails");
        return 0.0;
    };
    try {
        cluster_bootstrap(s, [&](const Sample& x) { return x.x == s.x ? 0.0 : broken(x); }, {200, 1});
        FAIL("expected an inference error");
    } catch (const InferenceError& e) {
        CHECK(e.failure_log.size() == 200);
    }
    CHECK_THROWS_AS(cluster_bootstrap(s, mean, {50, 1}), InputError);
}

TEST_CASE("resampled networks copy edges between distinct originals only") {
    const YearNetwork net{2020, 3, {{0, 1, 2.0}, {1, 2, 3.0}}};
    const std::vector<std::size_t> firms{1, 1, 0};
    const auto r = resample_network(net, firms);
    CHECK(r.n == 3);
    REQUIRE(r.edges.size() == 2);
    CHECK(r.edges[0].i == 0);
    CHECK(r.edges[0].j == 2);
    CHECK(r.edges[0].weight == 2.0);
    CHECK(r.edges[1].i == 1);
    CHECK(r.edges[1].j == 2);
    for (const auto& e : r.edges)
        CHECK(e.i != e.j);
    CHECK_THROWS_AS(resample_network(net, std::vector<std::size_t>{5}), InputError);
}
