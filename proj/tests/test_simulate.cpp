#include "techdiff/errors.hpp"
#include "techdiff/simulate.hpp"

#include <doctest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>

using namespace techdiff;

namespace {

SimConfig small_config() {
    SimConfig cfg;
    cfg.n_firms = 150;
    cfg.target_degree = 14.0;
    cfg.target_density = 14.0 / 149.0;
    cfg.min_degree = 6;
    cfg.churn_candidates = 4;
    return cfg;
}

}  // namespace

TEST_CASE("invalid configurations are rejected") {
    SimConfig cfg;
    cfg.n_firms = 1;
    CHECK_THROWS_AS(generate(cfg), ConfigError);
    cfg = SimConfig{};
    cfg.shock.year = 2030;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SimConfig{};
    cfg.shock.impulse = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SimConfig{};
    cfg.target_density = 0.5;
    CHECK_THROWS(generate(cfg));
}

TEST_CASE("explicit Euler step matches its formula and converges to the exact flow") {
    const YearNetwork net{2020, 3, {{0, 1, 1.0}, {1, 2, 2.0}}};
    const auto Ln = build_laplacian(net);
    const auto Ls = laplacian_from_edges(3, {{0, 2, 0.5}});
    Eigen::VectorXd u(3), f(3);
    u << 0.9, 0.1, 0.4;
    f << 0.0, 0.2, 0.1;
    const double dt = 0.05, c = 0.3;
    const Eigen::VectorXd expected = u + dt * (f - Ls.dense() * u - c * Ln.dense() * u);
    CHECK((step_dual(u, Ls, Ln, c, f, dt) - expected).cwiseAbs().maxCoeff() < 1e-15);

    const auto none = laplacian_from_edges(3, {});
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
    Eigen::VectorXd v = u;
    const int steps = 2000;
    for (int s = 0; s < steps; ++s)
        v = step_dual(v, none, Ln, 1.0, zero, 1.0 / steps);
    const Eigen::VectorXd exact = (-Ln.dense()).exp() * u;
    CHECK((v - exact).cwiseAbs().maxCoeff() < 1e-3);

    CHECK_THROWS_AS(step_dual(u, Ls, Ln, c, f, 10.0), ConfigError);
}

TEST_CASE("generated datasets are deterministic and well formed") {
    const auto cfg = small_config();
    const auto a = generate(cfg);
    const auto b = generate(cfg);
    CHECK(a.firms.coords.size() == 150);
    CHECK(a.panel.n_techs() == 6);
    CHECK(a.panel.n_years() == 14);
    CHECK(a.networks.size() == 14);
    CHECK_NOTHROW(a.panel.check_cumulative());
    for (std::size_t k = 0; k < a.panel.n_techs(); ++k)
        for (int y = a.panel.first_year(); y <= a.panel.last_year(); ++y) {
            const auto ra = a.panel.row(k, y), rb = b.panel.row(k, y);
            CHECK(std::equal(ra.begin(), ra.end(), rb.begin()));
        }
    CHECK(a.treated == b.treated);
    for (const auto& net : a.networks)
        CHECK_NOTHROW(validate(net));
    for (std::size_t k = 0; k < a.panel.n_techs(); ++k)
        for (std::size_t t = 1; t < a.log.lambda2[k].size(); ++t)
            CHECK(a.log.lambda2[k][t] >= a.log.lambda2[k][t - 1]);

    const auto treated = std::count(a.treated.begin(), a.treated.end(), 1);
    CHECK(treated > 0);
    CHECK(treated < 150);

    auto other = cfg;
    other.seed = 7;
    CHECK(generate(other).firms.coords[0].latitude != a.firms.coords[0].latitude);
}

TEST_CASE("technologies start at their introduction year") {
    const auto ds = generate(small_config());
    const auto genai = ds.panel.tech_index("GenAI");
    CHECK(ds.panel.adopter_count(genai, 2019) == 0);
    CHECK(ds.panel.adopter_count(genai, 2020) > 0);
}

TEST_CASE("the default dataset has the published shape") {
    const auto ds = generate(SimConfig{});
    CHECK(ds.firms.size() == 500);
    CHECK(ds.panel.n_years() == 14);
    CHECK(ds.panel.n_techs() == 6);
    CHECK(ds.log.density.front() == doctest::Approx(0.059).epsilon(0.03));
    CHECK(ds.log.mean_degree.front() == doctest::Approx(29.2).epsilon(0.02));
}
