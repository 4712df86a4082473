#pragma once

#include "techdiff/errors.hpp"
#include "techdiff/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace techdiff {

struct BootstrapOptions {
    int replicates = 1000;
    std::uint64_t seed = 42;
    double level = 0.95;
    double max_failure_share = 0.05;
};

struct BootstrapResult {
    double point = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    int replicates = 0;
    int failed = 0;
    std::vector<double> draws;  // successful replicate statistics in replicate order
};

// The ceil(q n)-th order statistic (1-based) of an ascending sample, clamped to [1, n].
double nearest_rank(std::span<const double> sorted, double q);

// Firm indices drawn with replacement for replicate `replicate`; a pure function of its arguments.
std::vector<std::size_t> resample_indices(std::size_t n, std::uint64_t seed, std::uint64_t replicate);

// Network on the resampled node list: node k is a copy of firms[k]; copies of distinct original firms
// keep the original edge, copies of the same firm are never joined.
YearNetwork resample_network(const YearNetwork& net, std::span<const std::size_t> firms);

// Firm-cluster percentile bootstrap. `Bundle` must provide, through argument-dependent lookup,
//   std::size_t firm_count(const Bundle&)
//   Bundle resample_firms(const Bundle&, std::span<const std::size_t>)
// and `statistic` must be pure. Replicates whose statistic throws techdiff::Error or returns a
// non-finite value are counted as failures.
template <class Bundle, class Statistic>
BootstrapResult cluster_bootstrap(const Bundle& data, Statistic&& statistic, const BootstrapOptions& opt = {}) {
    if (opt.replicates < 100)
        throw InputError("bootstrap needs at least 100 replicates, got " + std::to_string(opt.replicates));
    if (!(opt.level > 0.0 && opt.level < 1.0))
        throw InputError("bootstrap confidence level must lie in (0, 1)");
    const std::size_t n = firm_count(data);
    if (n == 0)
        throw InputError("bootstrap needs at least one firm");

    BootstrapResult res;
    res.point = statistic(data);
    res.replicates = opt.replicates;
    res.draws.reserve(static_cast<std::size_t>(opt.replicates));
    std::vector<std::string> failures;
    for (int b = 0; b < opt.replicates; ++b) {
        const auto idx = resample_indices(n, opt.seed, static_cast<std::uint64_t>(b));
        try {
            const double v = statistic(resample_firms(data, idx));
            if (!std::isfinite(v)) {
                failures.push_back("replicate " + std::to_string(b) + ": non-finite statistic");
                continue;
            }
            res.draws.push_back(v);
        } catch (const Error& e) {
            failures.push_back("replicate " + std::to_string(b) + ": " + e.what());
        }
    }
    res.failed = static_cast<int>(failures.size());
    if (static_cast<double>(res.failed) > opt.max_failure_share * static_cast<double>(opt.replicates))
        throw InferenceError(std::to_string(res.failed) + " of " + std::to_string(opt.replicates) +
                                 " bootstrap replicates failed",
                             std::move(failures));

    std::vector<double> sorted = res.draws;
    std::sort(sorted.begin(), sorted.end());
    const double tail = (1.0 - opt.level) / 2.0;
    res.ci_low = nearest_rank(sorted, tail);
    res.ci_high = nearest_rank(sorted, 1.0 - tail);
    return res;
}

}  // namespace techdiff
