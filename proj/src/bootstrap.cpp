#include "techdiff/bootstrap.hpp"

#include <map>
#include <random>
#include <utility>

namespace techdiff {

double nearest_rank(std::span<const double> sorted, double q) {
    if (sorted.empty())
        throw InputError("percentile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0))
        throw InputError("percentile level must lie in [0, 1]");
    const auto n = static_cast<double>(sorted.size());
    // Guard against q * n landing a hair above an integer through rounding.
    auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

std::vector<std::size_t> resample_indices(std::size_t n, std::uint64_t seed, std::uint64_t replicate) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx)
        i = pick(rng);
    return idx;
}

YearNetwork resample_network(const YearNetwork& net, std::span<const std::size_t> firms) {
    std::map<std::pair<std::size_t, std::size_t>, double> weight;
    for (const auto& e : net.edges)
        weight[{std::min(e.i, e.j), std::max(e.i, e.j)}] = e.weight;
    std::vector<std::vector<std::size_t>> copies(net.n);
    for (std::size_t k = 0; k < firms.size(); ++k) {
        if (firms[k] >= net.n)
            throw InputError("resampled firm index outside the network");
        copies[firms[k]].push_back(k);
    }
    YearNetwork out;
    out.year = net.year;
    out.n = firms.size();
    for (const auto& [key, w] : weight)
        for (auto a : copies[key.first])
            for (auto b : copies[key.second])
                out.edges.push_back({std::min(a, b), std::max(a, b), w});
    std::sort(out.edges.begin(), out.edges.end(),
              [](const Edge& x, const Edge& y) { return x.i != y.i ? x.i < y.i : x.j < y.j; });
    return out;
}

}  // namespace techdiff
