#include "techdiff/simulate.hpp"

#include "techdiff/decay.hpp"
#include "techdiff/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <limits>
#include <span>
#include <utility>

namespace techdiff {

std::vector<TechSpec> default_technologies() {
    return {
        {"AI", 2010, 0.12, 1.0},
        {"BigData", 2010, 0.18, 1.0},
        {"Blockchain", 2010, 0.05, 1.0},
        {"Cloud", 2010, 0.27, 1.0},
        {"GenAI", 2020, 0.06, 1.7},
        {"IoT", 2010, 0.15, 1.0},
    };
}

void SimConfig::validate() const {
    if (n_firms < 2)
        throw ConfigError("n_firms must be at least 2 (no network is possible otherwise)");
    if (last_year <= first_year)
        throw ConfigError("year range must span at least two years");
    if (technologies.empty())
        throw ConfigError("at least one technology is required");
    std::set<std::string> names;
    for (const auto& t : technologies) {
        if (t.name.empty() || !names.insert(t.name).second)
            throw ConfigError("technology names must be unique and non-empty");
        if (t.intro_year < first_year || t.intro_year > last_year)
            throw ConfigError("technology " + t.name + " intro year outside the simulated range");
        if (!(t.seed_fraction > 0.0 && t.seed_fraction < 1.0))
            throw ConfigError("technology " + t.name + " seed fraction must lie in (0, 1)");
        if (!(t.forcing_scale >= 0.0))
            throw ConfigError("technology " + t.name + " forcing scale must be nonnegative");
    }
    if (!(nu >= 0.0) || !(kappa > 0.0) || !(network_coupling >= 0.0) || !(forcing >= 0.0))
        throw ConfigError("nu, network_coupling and forcing must be nonnegative and kappa positive");
    if (!(dt > 0.0 && dt <= 1.0))
        throw ConfigError("dt must lie in (0, 1]");
    const double steps = 1.0 / dt;
    if (std::abs(steps - std::round(steps)) > 1e-9)
        throw ConfigError("dt must divide one year into a whole number of steps");
    if (!(target_density > 0.0 && target_density < 1.0))
        throw ConfigError("target_density must lie in (0, 1)");
    if (!(target_degree > 0.0))
        throw ConfigError("target_degree must be positive");
    multiplier.validate();
    if (n_clusters < 1 || n_clusters > n_firms)
        throw ConfigError("n_clusters must lie in [1, n_firms]");
    if (!(cluster_sigma_km > 0.0))
        throw ConfigError("cluster_sigma_km must be positive");
    if (!(lat_min < lat_max && lon_min < lon_max && lat_min >= -90.0 && lat_max <= 90.0 && lon_min >= -180.0 &&
          lon_max <= 180.0))
        throw ConfigError("cluster center bounding box is invalid");
    if (!(spatial_epsilon > 0.0 && spatial_epsilon < 1.0))
        throw ConfigError("spatial_epsilon must lie in (0, 1)");
    if (!(edge_persistence >= 0.0 && edge_persistence <= 1.0))
        throw ConfigError("edge_persistence must lie in [0, 1]");
    if (!(weight_mean > 0.0 && weight_cv >= 0.0 && degree_shape > 0.0))
        throw ConfigError("weight_mean and degree_shape must be positive, weight_cv nonnegative");
    if (!(stratum_km > 0.0))
        throw ConfigError("stratum_km must be positive");
    if (max_retries < 1 || churn_candidates < 1)
        throw ConfigError("max_retries and churn_candidates must be at least 1");
    if (static_cast<double>(min_degree) >= target_degree || min_degree + 1 > n_firms)
        throw ConfigError("min_degree must be below target_degree and n_firms - 1");
    if (shock.enabled) {
        if (shock.year <= first_year || shock.year > last_year)
            throw ConfigError("shock year must fall inside the simulated range after the first year");
        if (!(shock.forcing_boost >= 0.0) || !(shock.impulse >= 0.0) || !(shock.consolidation > 0.0))
            throw ConfigError("shock boost and impulse must be nonnegative and consolidation positive");
        if (shock.consolidation_to <= shock.consolidation_from)
            throw ConfigError("shock consolidation window is empty");
        if (!(shock.seed_cluster_share > 0.0 && shock.seed_cluster_share < 1.0))
            throw ConfigError("shock seed_cluster_share must lie in (0, 1)");
        if (!(shock.treated_epsilon > 0.0 && shock.treated_epsilon < 1.0))
            throw ConfigError("shock treated_epsilon must lie in (0, 1)");
    }
}

LaplacianMatrix spatial_laplacian(const DistanceMatrix& dm, double kappa, double cutoff_km, bool require_connected) {
    if (!(kappa > 0.0))
        throw DomainError("spatial kernel needs kappa > 0");
    if (!(cutoff_km >= 0.0))
        throw DomainError("spatial kernel cutoff must be nonnegative");
    const auto n = static_cast<std::size_t>(dm.rows());
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = dm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (d > cutoff_km)
                continue;
            const double w = std::exp(-kappa * d);
            if (w > 0.0)
                edges.push_back({i, j, w});
        }
    if (require_connected) {
        const auto c = component_count(n, edges);
        if (c != 1)
            throw ConnectivityError("spatial kernel graph has " + std::to_string(c) +
                                    " components; increase the cutoff (currently " + std::to_string(cutoff_km) +
                                    " km)");
    }
    return laplacian_from_edges(n, edges);
}

LaplacianMatrix spatial_laplacian(const FirmTable& firms, double kappa, double cutoff_km) {
    return spatial_laplacian(distance_matrix(firms), kappa, cutoff_km, true);
}

void check_stability(const LaplacianMatrix& L_spatial, const LaplacianMatrix& L_network, double coupling,
                     double dt) {
    if (L_spatial.size() != L_network.size())
        throw InputError("spatial and network Laplacians differ in size");
    if (!(dt > 0.0))
        throw ConfigError("time step must be positive");
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(L_spatial.size()));
    auto accumulate = [&](const LaplacianMatrix& lap, double c) {
        for (int k = 0; k < lap.L.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(lap.L, k); it; ++it)
                rows(it.row()) += c * std::abs(it.value());
    };
    accumulate(L_spatial, 1.0);
    accumulate(L_network, std::abs(coupling));
    const double bound = rows.size() ? rows.maxCoeff() : 0.0;
    if (!(dt * bound < 2.0))
        throw ConfigError("explicit Euler step unstable: dt * max row sum = " + std::to_string(dt * bound) +
                          " (must be < 2)");
}

namespace {

Eigen::VectorXd euler_step(const Eigen::VectorXd& u, const LaplacianMatrix& Ls, const LaplacianMatrix& Ln,
                           double coupling, const Eigen::VectorXd& f, double dt) {
    Eigen::VectorXd rhs = f - Ls.L * u;
    if (coupling != 0.0)
        rhs -= coupling * (Ln.L * u);
    return (u + dt * rhs).cwiseMax(0.0).cwiseMin(1.0);
}

using Rng = std::mt19937_64;

Rng stream(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
    return Rng(seq);
}

double lognormal_weight(Rng& rng, double mean, double cv) {
    const double s2 = std::log(1.0 + cv * cv);
    std::normal_distribution<double> z(0.0, 1.0);
    return mean * std::exp(-0.5 * s2 + std::sqrt(s2) * z(rng));
}

struct EdgeKey {
    std::size_t i, j;
    auto operator<=>(const EdgeKey&) const = default;
};

using EdgeSet = std::map<EdgeKey, double>;

class NetworkSampler {
public:
    NetworkSampler(std::size_t n, const std::vector<double>& propensity, std::size_t min_degree)
        : n_(n), floor_(min_degree), pick_(propensity.begin(), propensity.end()) {}

    EdgeSet base(Rng& rng, std::size_t m, double weight_mean, double weight_cv) {
        EdgeSet edges;
        add(rng, edges, m, weight_mean, weight_cv);
        auto deg = degrees(edges);
        for (std::size_t v = 0; v < n_; ++v)
            for (std::size_t guard = 0; deg[v] < floor_; ++guard) {
                if (guard > 100 * n_)
                    throw GenerationError("cannot satisfy the minimum degree floor");
                const auto u = pick_(rng);
                EdgeKey key{std::min(u, v), std::max(u, v)};
                if (u == v || edges.count(key))
                    continue;
                edges.emplace(key, lognormal_weight(rng, weight_mean, weight_cv));
                ++deg[u];
                ++deg[v];
            }
        remove(rng, edges, deg, edges.size() - std::min(edges.size(), m));
        return edges;
    }

    // Drops `count` edges at random and rewires their endpoints into fresh links, so every firm keeps
    // its degree; pairs that cannot be rewired fall back to Chung-Lu draws.
    EdgeSet churn(Rng& rng, const EdgeSet& edges, std::size_t count, double survivor_factor, double weight_mean,
                  double weight_cv) {
        EdgeSet next = edges;
        std::vector<EdgeKey> keys;
        keys.reserve(next.size());
        for (const auto& [k, w] : next)
            keys.push_back(k);
        std::shuffle(keys.begin(), keys.end(), rng);
        keys.resize(std::min(count, keys.size()));
        std::vector<std::size_t> stubs;
        stubs.reserve(2 * keys.size());
        for (const auto& k : keys) {
            next.erase(k);
            stubs.push_back(k.i);
            stubs.push_back(k.j);
        }
        for (auto& [k, w] : next)
            w *= survivor_factor;
        std::size_t added = 0;
        for (int pass = 0; pass < 20 && stubs.size() >= 2; ++pass) {
            std::shuffle(stubs.begin(), stubs.end(), rng);
            std::vector<std::size_t> left;
            for (std::size_t s = 0; s + 1 < stubs.size(); s += 2) {
                const auto a = stubs[s];
                const auto b = stubs[s + 1];
                EdgeKey key{std::min(a, b), std::max(a, b)};
                if (a == b || next.count(key)) {
                    left.push_back(a);
                    left.push_back(b);
                    continue;
                }
                next.emplace(key, lognormal_weight(rng, weight_mean, weight_cv));
                ++added;
            }
            stubs = std::move(left);
        }
        add(rng, next, keys.size() - added, weight_mean, weight_cv);
        return next;
    }

private:
    std::vector<std::size_t> degrees(const EdgeSet& edges) const {
        std::vector<std::size_t> deg(n_, 0);
        for (const auto& [k, w] : edges) {
            ++deg[k.i];
            ++deg[k.j];
        }
        return deg;
    }

    void add(Rng& rng, EdgeSet& edges, std::size_t count, double weight_mean, double weight_cv) {
        const std::size_t capacity = n_ * (n_ - 1) / 2;
        if (edges.size() + count > capacity)
            throw GenerationError("requested more edges than node pairs");
        std::size_t added = 0;
        std::size_t attempts = 0;
        while (added < count) {
            if (++attempts > 1000 * (count + 10))
                throw GenerationError("edge sampler stalled while drawing new supply links");
            const auto a = pick_(rng);
            const auto b = pick_(rng);
            if (a == b)
                continue;
            EdgeKey key{std::min(a, b), std::max(a, b)};
            if (edges.count(key))
                continue;
            edges.emplace(key, lognormal_weight(rng, weight_mean, weight_cv));
            ++added;
        }
    }

    void remove(Rng& rng, EdgeSet& edges, std::vector<std::size_t>& deg, std::size_t count) {
        std::vector<EdgeKey> keys;
        keys.reserve(edges.size());
        for (const auto& [k, w] : edges)
            keys.push_back(k);
        std::shuffle(keys.begin(), keys.end(), rng);
        std::size_t removed = 0;
        for (const auto& k : keys) {
            if (removed == count)
                break;
            if (deg[k.i] <= floor_ || deg[k.j] <= floor_)
                continue;
            edges.erase(k);
            --deg[k.i];
            --deg[k.j];
            ++removed;
        }
        if (removed < count)
            throw GenerationError("edge turnover conflicts with the minimum degree floor");
    }

    std::size_t n_;
    std::size_t floor_;
    std::discrete_distribution<std::size_t> pick_;
};

// Smallest adopter-weighted node strength.
double min_weighted_strength(std::size_t n, const EdgeSet& edges, std::span<const std::uint8_t> adopted,
                             const MultiplierScheme& m) {
    std::vector<double> s(n, 0.0);
    for (const auto& [k, w] : edges) {
        const int c = static_cast<int>(adopted[k.i] != 0) + static_cast<int>(adopted[k.j] != 0);
        const double v = w * (c == 2 ? m.both_adopted : (c == 1 ? m.one_adopted : m.neither));
        s[k.i] += v;
        s[k.j] += v;
    }
    return *std::min_element(s.begin(), s.end());
}

YearNetwork to_network(int year, std::size_t n, const std::map<EdgeKey, double>& edges) {
    YearNetwork net;
    net.year = year;
    net.n = n;
    net.edges.reserve(edges.size());
    for (const auto& [k, w] : edges)
        net.edges.push_back({k.i, k.j, w});
    return net;
}

bool connected(std::size_t n, const std::map<EdgeKey, double>& edges) {
    std::vector<Edge> e;
    e.reserve(edges.size());
    for (const auto& [k, w] : edges)
        e.push_back({k.i, k.j, w});
    return component_count(n, e) == 1;
}

double lambda2_of(const YearNetwork& net) {
    return lambda2_lanczos(laplacian_from_edges(net.n, net.edges), 0, 1e-10).lambda2;
}

// Mean squared deviation of the treated-minus-control adoption gap from its own average, over the
// pre-shock years of every technology introduced at least three years before the shock.
double pretrend_imbalance(const SimConfig& cfg, const AdoptionPanel& panel, std::span<const std::uint8_t> treated) {
    std::size_t n_treated = 0;
    for (auto t : treated)
        n_treated += t;
    if (n_treated == 0 || n_treated == treated.size())
        return std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (std::size_t k = 0; k < cfg.technologies.size(); ++k) {
        const int from = std::max(cfg.technologies[k].intro_year, cfg.first_year);
        if (cfg.shock.year - from < 4)
            continue;
        std::vector<double> gap;
        for (int year = from; year < cfg.shock.year; ++year) {
            const auto row = panel.row(k, year);
            double a_t = 0.0, a_c = 0.0;
            for (std::size_t i = 0; i < row.size(); ++i)
                (treated[i] ? a_t : a_c) += row[i];
            gap.push_back(a_t / static_cast<double>(n_treated) -
                          a_c / static_cast<double>(treated.size() - n_treated));
        }
        double mean = 0.0;
        for (double g : gap)
            mean += g;
        mean /= static_cast<double>(gap.size());
        double ss = 0.0;
        for (double g : gap)
            ss += (g - mean) * (g - mean);
        total += ss / static_cast<double>(gap.size());
    }
    return total;
}

// Picks the seed clusters and marks every firm within d*(kappa, treated_epsilon) of them as treated.
void assign_shock(const SimConfig& cfg, const DistanceMatrix& dm, SyntheticDataset& ds, Rng& rng) {
    const std::size_t n = ds.firms.size();
    const std::size_t C = cfg.n_clusters;
    const auto k = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(cfg.shock.seed_cluster_share * static_cast<double>(C))), 1, C);
    const double reach = spatial_boundary(cfg.kappa, cfg.shock.treated_epsilon);

    auto random_split = [&] {
        std::vector<std::size_t> order(C);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<std::uint8_t> chosen(C, 0);
        for (std::size_t c = 0; c < k; ++c)
            chosen[order[c]] = 1;
        return chosen;
    };
    std::vector<std::vector<std::uint8_t>> splits;
    if (!cfg.shock.balance) {
        splits.push_back(random_split());
    } else if (C <= 16) {
        for (std::uint32_t mask = 0; mask < (1u << C); ++mask) {
            if (static_cast<std::size_t>(std::popcount(mask)) != k)
                continue;
            std::vector<std::uint8_t> chosen(C, 0);
            for (std::size_t c = 0; c < C; ++c)
                chosen[c] = (mask >> c) & 1u;
            splits.push_back(std::move(chosen));
        }
    } else {
        for (int draw = 0; draw < 256; ++draw)
            splits.push_back(random_split());
    }

    double best = std::numeric_limits<double>::infinity();
    for (const auto& chosen : splits) {
        std::vector<std::uint8_t> seed(n), treated(n);
        for (std::size_t i = 0; i < n; ++i)
            seed[i] = chosen[ds.cluster[i]];
        const auto d = distance_to_set(dm, seed);
        for (std::size_t i = 0; i < n; ++i)
            treated[i] = d[i] <= reach ? 1 : 0;
        const double score = cfg.shock.balance ? pretrend_imbalance(cfg, ds.panel, treated) : 0.0;
        if (splits.size() == 1 || score < best) {
            best = score;
            ds.shock_seed = std::move(seed);
            ds.treated = std::move(treated);
        }
    }
    ds.log.shock_imbalance = best;
}

}  // namespace

Eigen::VectorXd step_dual(const Eigen::VectorXd& u, const LaplacianMatrix& L_spatial,
                          const LaplacianMatrix& L_network, double coupling, const Eigen::VectorXd& f, double dt) {
    const auto n = static_cast<Eigen::Index>(L_spatial.size());
    if (u.size() != n || f.size() != n)
        throw InputError("step_dual: state, forcing and Laplacians must agree in size");
    check_stability(L_spatial, L_network, coupling, dt);
    return euler_step(u, L_spatial, L_network, coupling, f, dt);
}

SyntheticDataset generate(const SimConfig& cfg) {
    cfg.validate();
    SyntheticDataset ds;
    ds.config = cfg;
    const std::size_t n = cfg.n_firms;
    const int T = cfg.n_years();

    const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    const auto m = static_cast<std::size_t>(std::llround(static_cast<double>(n) * cfg.target_degree / 2.0));
    const double density = static_cast<double>(m) / pairs;
    const double degree = 2.0 * static_cast<double>(m) / static_cast<double>(n);
    if (std::abs(density - cfg.target_density) > 0.002 || std::abs(degree - cfg.target_degree) > 0.5 || m < n - 1)
        throw GenerationError("network targets unreachable for n = " + std::to_string(n) + ": " + std::to_string(m) +
                              " edges give density " + std::to_string(density) + " and mean degree " +
                              std::to_string(degree) + " (targets " + std::to_string(cfg.target_density) + ", " +
                              std::to_string(cfg.target_degree) + ")");

    Rng rng = stream(cfg.seed, 0);

    // Geography: firms scattered around cluster centers.
    std::uniform_real_distribution<double> ulat(cfg.lat_min, cfg.lat_max);
    std::uniform_real_distribution<double> ulon(cfg.lon_min, cfg.lon_max);
    std::vector<GeoPoint> centers(cfg.n_clusters);
    for (auto& c : centers) {
        c.latitude = ulat(rng);
        c.longitude = ulon(rng);
    }
    ds.cluster.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        ds.cluster[i] = i % cfg.n_clusters;
    std::shuffle(ds.cluster.begin(), ds.cluster.end(), rng);
    std::normal_distribution<double> scatter(0.0, cfg.cluster_sigma_km / (kEarthRadiusKm * std::acos(-1.0) / 180.0));
    ds.firms.ids.resize(n);
    ds.firms.coords.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = centers[ds.cluster[i]];
        const double lat = std::clamp(c.latitude + scatter(rng), -89.9, 89.9);
        double lon = c.longitude + scatter(rng) / std::cos(c.latitude * std::acos(-1.0) / 180.0);
        lon = std::clamp(lon, -180.0, 180.0);
        ds.firms.ids[i] = static_cast<long>(i + 1);
        ds.firms.coords[i] = {lat, lon};
    }
    const DistanceMatrix dm = distance_matrix(ds.firms);
    LaplacianMatrix Ls = spatial_laplacian(dm, cfg.kappa, spatial_boundary(cfg.kappa, cfg.spatial_epsilon), false);
    Ls.L *= cfg.nu;

    // Base supply network.
    std::gamma_distribution<double> gamma(cfg.degree_shape, 1.0);
    std::vector<double> propensity(n);
    for (auto& p : propensity)
        p = gamma(rng);
    NetworkSampler sampler(n, propensity, cfg.min_degree);
    EdgeSet edges;
    for (int attempt = 0;; ++attempt) {
        if (attempt >= cfg.max_retries)
            throw GenerationError("could not draw a connected base network in " + std::to_string(cfg.max_retries) +
                                  " attempts (n = " + std::to_string(n) + ", edges = " + std::to_string(m) + ")");
        edges = sampler.base(rng, m, cfg.weight_mean, cfg.weight_cv);
        if (connected(n, edges))
            break;
        ++ds.log.network_retries;
    }

    ds.shock_seed.assign(n, 0);
    ds.treated.assign(n, 0);

    // Technology streams and seed adopters.
    std::vector<std::string> names;
    for (const auto& t : cfg.technologies)
        names.push_back(t.name);
    ds.panel = AdoptionPanel(n, cfg.first_year, cfg.last_year, names);
    const std::size_t K = cfg.technologies.size();
    std::vector<Rng> tech_rng;
    std::vector<std::map<long, double>> carry(K);
    for (std::size_t k = 0; k < K; ++k)
        tech_rng.push_back(stream(cfg.seed, 1000 + k));
    auto seed_tech = [&](std::size_t k) {
        const auto& spec = cfg.technologies[k];
        auto& r = tech_rng[k];
        auto row = ds.panel.row(k, spec.intro_year);
        for (std::size_t c = 0; c < cfg.n_clusters; ++c) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < n; ++i)
                if (ds.cluster[i] == c)
                    members.push_back(i);
            std::shuffle(members.begin(), members.end(), r);
            const auto s = std::min<std::size_t>(
                members.size(),
                static_cast<std::size_t>(std::llround(spec.seed_fraction * static_cast<double>(members.size()))));
            for (std::size_t q = 0; q < s; ++q)
                row[members[q]] = 1;
        }
    };

    const int steps = static_cast<int>(std::lround(1.0 / cfg.dt));
    const double consolidation_step =
        cfg.shock.enabled
            ? std::pow(cfg.shock.consolidation, 1.0 / static_cast<double>(cfg.shock.consolidation_to -
                                                                         cfg.shock.consolidation_from))
            : 1.0;
    double weight_scale = 1.0;

    auto advance = [&](std::size_t k, int year, const YearNetwork& prev_net) {
        const auto& spec = cfg.technologies[k];
        auto& r = tech_rng[k];
        auto prev = ds.panel.row(k, year - 1);
        auto cur = ds.panel.row(k, year);
        std::copy(prev.begin(), prev.end(), cur.begin());
        if (ds.panel.adopter_count(k, year - 1) == 0)
            return;

        const auto dmin = distance_to_set(dm, prev);
        const bool boosted = cfg.shock.enabled && year >= cfg.shock.year;
        Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            if (prev[i]) {
                u(ii) = 1.0;
                continue;
            }
            double fi = cfg.forcing * spec.forcing_scale * std::exp(-cfg.kappa * dmin[i]);
            if (boosted && ds.treated[i]) {
                fi *= 1.0 + cfg.shock.forcing_boost;
                if (year == cfg.shock.year)
                    fi *= 1.0 + cfg.shock.impulse;
            }
            f(ii) = fi;
        }
        const auto weighted = tech_weighted_network(prev_net, ds.panel, k, year - 1, cfg.multiplier);
        const auto Ln = laplacian_from_edges(n, weighted.edges);
        check_stability(Ls, Ln, cfg.network_coupling, cfg.dt);
        for (int s = 0; s < steps; ++s)
            u = euler_step(u, Ls, Ln, cfg.network_coupling, f, cfg.dt);

        // Stratified systematic realization: within each distance stratum the realized count tracks
        // the summed propensity, with the fractional remainder carried to the next year.
        std::map<long, std::vector<std::size_t>> strata;
        for (std::size_t i = 0; i < n; ++i)
            if (!prev[i])
                strata[static_cast<long>(std::floor(dmin[i] / cfg.stratum_km))].push_back(i);
        for (auto& [key, members] : strata) {
            std::shuffle(members.begin(), members.end(), r);
            auto it = carry[k].find(key);
            double c = it != carry[k].end() ? it->second : 0.5;
            double total = c;
            for (auto i : members) {
                const double before = std::floor(total);
                total += u(static_cast<Eigen::Index>(i));
                if (std::floor(total) > before)
                    cur[i] = 1;
            }
            carry[k][key] = total - std::floor(total);
        }
    };

    ds.networks.reserve(static_cast<std::size_t>(T));
    ds.log.lambda2.assign(K, std::vector<double>(static_cast<std::size_t>(T), 0.0));
    for (int t = 0; t < T; ++t) {
        const int year = cfg.first_year + t;
        ds.log.years.push_back(year);
        if (t > 0) {
            const std::size_t drop = static_cast<std::size_t>(
                std::llround((1.0 - cfg.edge_persistence) * static_cast<double>(edges.size())));
            const bool consolidating = cfg.shock.enabled && year > cfg.shock.consolidation_from &&
                                       year <= cfg.shock.consolidation_to;
            const double survivor = consolidating ? consolidation_step : 1.0;
            const double fresh_mean = cfg.weight_mean * weight_scale;
            // Among candidate turnovers, prefer one that lowers no technology's weakest adopter-weighted
            // node strength at last year's adoption state.
            std::vector<double> floor_before(K);
            for (std::size_t k = 0; k < K; ++k)
                floor_before[k] = min_weighted_strength(n, edges, ds.panel.row(k, year - 1), cfg.multiplier);
            EdgeSet next;
            double best_score = -1.0;
            int drawn = 0;
            for (int attempt = 0; drawn < cfg.churn_candidates; ++attempt) {
                if (attempt >= cfg.max_retries + cfg.churn_candidates)
                    break;
                auto cand = sampler.churn(rng, edges, drop, survivor, fresh_mean, cfg.weight_cv);
                if (!connected(n, cand)) {
                    ++ds.log.network_retries;
                    continue;
                }
                ++drawn;
                double score = std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < K; ++k)
                    score = std::min(score, min_weighted_strength(n, cand, ds.panel.row(k, year - 1), cfg.multiplier) /
                                                (floor_before[k] * survivor));
                if (score > best_score) {
                    best_score = score;
                    next = std::move(cand);
                }
                if (best_score >= 1.0)
                    break;
            }
            if (drawn == 0)
                throw GenerationError("edge turnover left the network disconnected in year " + std::to_string(year) +
                                      " after " + std::to_string(cfg.max_retries) + " attempts");
            edges = std::move(next);
        }
        ds.networks.push_back(to_network(year, n, edges));

        if (cfg.shock.enabled && year == cfg.shock.year)
            assign_shock(cfg, dm, ds, rng);

        for (std::size_t k = 0; k < K; ++k) {
            const auto& spec = cfg.technologies[k];
            if (year == spec.intro_year)
                seed_tech(k);
            else if (year > spec.intro_year)
                advance(k, year, ds.networks[static_cast<std::size_t>(t - 1)]);
        }

        // Keep every technology's adopter-weighted lambda2 nondecreasing: edge turnover can lower it,
        // so the year's weights are scaled up by the smallest factor that restores the ordering.
        std::vector<double> lam(K);
        for (std::size_t k = 0; k < K; ++k)
            lam[k] = lambda2_of(tech_weighted_network(ds.networks.back(), ds.panel, k, year, cfg.multiplier));
        double rescale = 1.0;
        if (t > 0)
            for (std::size_t k = 0; k < K; ++k) {
                const double before = ds.log.lambda2[k][static_cast<std::size_t>(t - 1)];
                if (lam[k] < before)
                    rescale = std::max(rescale, before / lam[k] * (1.0 + 1e-9));
            }
        if (rescale > 1.0) {
            for (auto& [key, w] : edges)
                w *= rescale;
            ds.networks.back() = to_network(year, n, edges);
            weight_scale *= rescale;
            for (auto& l : lam)
                l *= rescale;
        }
        ds.log.weight_rescale.push_back(rescale);
        for (std::size_t k = 0; k < K; ++k)
            ds.log.lambda2[k][static_cast<std::size_t>(t)] = lam[k];

        double wsum = 0.0;
        for (const auto& [key, w] : edges)
            wsum += w;
        ds.log.density.push_back(static_cast<double>(edges.size()) / pairs);
        ds.log.mean_degree.push_back(2.0 * static_cast<double>(edges.size()) / static_cast<double>(n));
        ds.log.mean_weight.push_back(wsum / static_cast<double>(edges.size()));
    }
    return ds;
}

}  // namespace techdiff
