#pragma once

#include "techdiff/did.hpp"
#include "techdiff/types.hpp"

#include <Eigen/Dense>

#include <random>
#include <set>
#include <utility>
#include <vector>

namespace testutil {

// Random connected weighted graph: a random spanning tree plus extra random edges.
inline techdiff::YearNetwork random_connected(std::size_t n, double extra_density, std::mt19937_64& rng) {
    techdiff::YearNetwork net;
    net.n = n;
    std::uniform_real_distribution<double> weight(0.1, 10.0), coin(0.0, 1.0);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t v = 1; v < n; ++v) {
        std::uniform_int_distribution<std::size_t> parent(0, v - 1);
        const auto u = parent(rng);
        seen.insert({u, v});
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (coin(rng) < extra_density)
                seen.insert({i, j});
    for (const auto& [i, j] : seen)
        net.edges.push_back({i, j, weight(rng)});
    return net;
}

// Balanced panel whose outcome is alpha_i + gamma_t + beta * treated * post + noise.
inline techdiff::DidPanel linear_panel(std::size_t n, int first_year, int last_year, int event_year, double beta,
                                       double noise, std::mt19937_64& rng, double pretrend_slope = 0.0) {
    techdiff::DidPanel p;
    p.first_year = first_year;
    const int T = last_year - first_year + 1;
    p.outcome.resize(static_cast<Eigen::Index>(n), T);
    p.dmin = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), T);
    p.exposure = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), T);
    p.treated.assign(n, 0);
    p.lambda2.assign(static_cast<std::size_t>(T), 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> gamma(static_cast<std::size_t>(T));
    for (auto& g : gamma)
        g = 0.5 * z(rng);
    for (std::size_t i = 0; i < n; ++i) {
        p.treated[i] = i < n / 2 ? 1 : 0;
        const double alpha = z(rng);
        for (int t = 0; t < T; ++t) {
            const int year = first_year + t;
            double y = alpha + gamma[static_cast<std::size_t>(t)] + noise * z(rng);
            if (p.treated[i] && year >= event_year)
                y += beta;
            if (p.treated[i] && year < event_year)
                y += pretrend_slope * (year - event_year);
            p.outcome(static_cast<Eigen::Index>(i), t) = y;
        }
    }
    return p;
}

}  // namespace testutil
