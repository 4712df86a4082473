#include "techdiff/spectral.hpp"

#include "techdiff/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <utility>

namespace techdiff {

namespace {

struct DisjointSet {
    explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b)
            return false;
        parent[b] = a;
        return true;
    }
    std::vector<std::size_t> parent;
};

std::vector<std::vector<std::size_t>> adjacency(const YearNetwork& net) {
    std::vector<std::vector<std::size_t>> adj(net.n);
    for (const auto& e : net.edges) {
        adj[e.i].push_back(e.j);
        adj[e.j].push_back(e.i);
    }
    for (auto& a : adj)
        std::sort(a.begin(), a.end());
    return adj;
}

}  // namespace

double LaplacianMatrix::max_abs_row_sum() const {
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(L.rows());
    for (int k = 0; k < L.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(L, k); it; ++it)
            sums(it.row()) += std::abs(it.value());
    return sums.size() ? sums.maxCoeff() : 0.0;
}

std::size_t component_count(std::size_t n, const std::vector<Edge>& edges) {
    DisjointSet ds(n);
    std::size_t components = n;
    for (const auto& e : edges)
        if (e.weight > 0.0 && ds.unite(e.i, e.j))
            --components;
    return components;
}

void validate(const YearNetwork& net) {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& e : net.edges) {
        if (e.i >= e.j || e.j >= net.n)
            throw InputError("network edge (" + std::to_string(e.i) + ", " + std::to_string(e.j) +
                             ") must satisfy i < j < n");
        if (!(e.weight > 0.0) || !std::isfinite(e.weight))
            throw InputError("network edge (" + std::to_string(e.i) + ", " + std::to_string(e.j) +
                             ") has non-positive weight");
        if (!seen.emplace(e.i, e.j).second)
            throw InputError("network edge (" + std::to_string(e.i) + ", " + std::to_string(e.j) +
                             ") listed twice");
    }
    const auto c = component_count(net.n, net.edges);
    if (net.n == 0 || c != 1)
        throw ConnectivityError("network for year " + std::to_string(net.year) + " has " + std::to_string(c) +
                                " components; a connected graph is required");
}

LaplacianMatrix laplacian_from_edges(std::size_t n, const std::vector<Edge>& edges) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(4 * edges.size());
    std::vector<double> deg(n, 0.0);
    for (const auto& e : edges) {
        if (e.i >= n || e.j >= n)
            throw InputError("edge endpoint out of range");
        if (e.i == e.j)
            continue;
        trip.emplace_back(static_cast<int>(e.i), static_cast<int>(e.j), -e.weight);
        trip.emplace_back(static_cast<int>(e.j), static_cast<int>(e.i), -e.weight);
        deg[e.i] += e.weight;
        deg[e.j] += e.weight;
    }
    for (std::size_t i = 0; i < n; ++i)
        trip.emplace_back(static_cast<int>(i), static_cast<int>(i), deg[i]);
    LaplacianMatrix out;
    out.L.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    out.L.setFromTriplets(trip.begin(), trip.end());
    out.L.makeCompressed();
    return out;
}

LaplacianMatrix build_laplacian(const YearNetwork& net) {
    validate(net);
    return laplacian_from_edges(net.n, net.edges);
}

YearNetwork tech_weighted_network(const YearNetwork& net, const AdoptionPanel& panel, TechId tech, int year,
                                  const MultiplierScheme& m) {
    m.validate();
    if (net.n != panel.n_firms())
        throw InputError("network node count " + std::to_string(net.n) + " differs from panel firm count " +
                         std::to_string(panel.n_firms()));
    auto adopted = panel.row(tech, year);
    YearNetwork out = net;
    for (auto& e : out.edges) {
        const int k = static_cast<int>(adopted[e.i] != 0) + static_cast<int>(adopted[e.j] != 0);
        e.weight *= k == 2 ? m.both_adopted : (k == 1 ? m.one_adopted : m.neither);
    }
    return out;
}

YearNetwork scale_weights(const YearNetwork& net, double factor) {
    YearNetwork out = net;
    for (auto& e : out.edges)
        e.weight *= factor;
    return out;
}

TridiagonalEigen tridiagonal_eigen(std::vector<double> a, std::vector<double> b) {
    const std::size_t m = a.size();
    if (m == 0)
        return {};
    if (b.size() + 1 != m)
        throw InputError("tridiagonal_eigen: off-diagonal must have length n - 1");

    std::vector<double> z(m, 0.0);
    z[m - 1] = 1.0;
    const double eps = std::numeric_limits<double>::epsilon();

    std::size_t hi = m - 1;
    int sweeps = 0;
    const int max_sweeps = 60 * static_cast<int>(m) + 60;
    while (hi > 0) {
        if (std::abs(b[hi - 1]) <= eps * (std::abs(a[hi - 1]) + std::abs(a[hi]))) {
            b[hi - 1] = 0.0;
            --hi;
            continue;
        }
        std::size_t lo = hi - 1;
        while (lo > 0 && std::abs(b[lo - 1]) > eps * (std::abs(a[lo - 1]) + std::abs(a[lo])))
            --lo;
        if (++sweeps > max_sweeps)
            throw ConvergenceError("tridiagonal QR did not converge", a[hi], std::abs(b[hi - 1]));

        // Wilkinson shift from the trailing 2x2 block.
        const double d = (a[hi - 1] - a[hi]) / 2.0;
        const double e = b[hi - 1];
        const double denom = d + std::copysign(std::hypot(d, e), d == 0.0 ? 1.0 : d);
        const double mu = a[hi] - e * e / denom;

        double x = a[lo] - mu;
        double g = b[lo];
        for (std::size_t k = lo; k < hi; ++k) {
            const double r = std::hypot(x, g);
            const double c = r == 0.0 ? 1.0 : x / r;
            const double s = r == 0.0 ? 0.0 : g / r;
            if (k > lo)
                b[k - 1] = r;
            const double p = a[k];
            const double q = b[k];
            const double t = a[k + 1];
            a[k] = c * c * p + 2.0 * c * s * q + s * s * t;
            a[k + 1] = s * s * p - 2.0 * c * s * q + c * c * t;
            b[k] = c * s * (t - p) + (c * c - s * s) * q;
            if (k + 1 < hi) {
                g = s * b[k + 1];
                b[k + 1] *= c;
                x = b[k];
            }
            const double zk = z[k];
            const double zk1 = z[k + 1];
            z[k] = c * zk + s * zk1;
            z[k + 1] = -s * zk + c * zk1;
        }
    }

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a[i] < a[j]; });
    TridiagonalEigen out;
    out.values.reserve(m);
    out.last_components.reserve(m);
    for (auto i : order) {
        out.values.push_back(a[i]);
        out.last_components.push_back(z[i]);
    }
    return out;
}

LanczosResult lambda2_lanczos(const LaplacianMatrix& lap, int max_iter, double tol, std::uint64_t seed) {
    const auto n = static_cast<Eigen::Index>(lap.size());
    if (n < 2)
        throw InputError("lambda2_lanczos needs at least 2 nodes");
    const int limit = static_cast<int>(n - 1);
    if (max_iter <= 0 || max_iter > limit)
        max_iter = limit;

    auto deflate = [&](Eigen::VectorXd& v) { v.array() -= v.sum() / static_cast<double>(n); };

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd q(n);
    for (Eigen::Index i = 0; i < n; ++i)
        q(i) = normal(rng);
    deflate(q);
    q.normalize();

    const double scale = std::max(lap.max_abs_row_sum(), 1e-300);
    Eigen::MatrixXd V(n, max_iter + 1);
    V.col(0) = q;
    std::vector<double> alpha;
    std::vector<double> beta;
    LanczosResult best;

    for (int k = 0; k < max_iter; ++k) {
        Eigen::VectorXd w = lap.L * V.col(k);
        deflate(w);
        const double ak = V.col(k).dot(w);
        alpha.push_back(ak);
        w -= ak * V.col(k);
        if (k > 0)
            w -= beta.back() * V.col(k - 1);
        for (int pass = 0; pass < 2; ++pass) {
            auto basis = V.leftCols(k + 1);
            w -= basis * (basis.transpose() * w);
            deflate(w);
        }
        const double bk = w.norm();

        auto te = tridiagonal_eigen(alpha, beta);
        const double theta = te.values[0];
        const double resid = std::abs(bk * te.last_components[0]);
        double bound = resid;
        if (te.values.size() > 1) {
            const double gap = te.values[1] - theta;
            if (gap > 0.0)
                bound = std::min(resid, resid * resid / gap);
        }
        best = {theta, resid, bound, k + 1};

        const bool exhausted = k + 1 == limit || bk <= 1e-13 * scale;
        if (bound <= tol || exhausted)
            return best;
        beta.push_back(bk);
        V.col(k + 1) = w / bk;
    }
    throw ConvergenceError("Lanczos did not reach tolerance in " + std::to_string(max_iter) + " iterations",
                           best.lambda2, best.residual);
}

LaplacianSpectrum dense_spectrum(const LaplacianMatrix& L, bool with_vectors, std::size_t dense_cap) {
    if (L.size() > dense_cap)
        throw SizeError("dense spectrum requested for n = " + std::to_string(L.size()) + " above cap " +
                        std::to_string(dense_cap));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L.dense(),
                                                      with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw ConvergenceError("dense eigensolver failed", std::numeric_limits<double>::quiet_NaN(),
                               std::numeric_limits<double>::quiet_NaN());
    LaplacianSpectrum out;
    out.eigenvalues = es.eigenvalues();
    if (with_vectors)
        out.eigenvectors = es.eigenvectors();
    out.zero_count = static_cast<std::size_t>((out.eigenvalues.array() < kZeroEigenvalue).count());
    return out;
}

double mixing_time(double lambda2, double epsilon) {
    if (!(lambda2 > 0.0))
        throw DomainError("mixing time undefined for lambda2 <= 0 (disconnected network)");
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw DomainError("mixing time epsilon must lie in (0, 1)");
    return std::log(1.0 / epsilon) / lambda2;
}

Eigen::VectorXd diffuse_modes(const LaplacianSpectrum& spectrum, const Eigen::VectorXd& u0, double t) {
    if (spectrum.eigenvectors.size() == 0)
        throw InputError("diffuse_modes needs eigenvectors");
    if (spectrum.eigenvectors.rows() != u0.size())
        throw InputError("diffuse_modes: state length does not match spectrum");
    const Eigen::VectorXd coeff = spectrum.eigenvectors.transpose() * u0;
    const Eigen::VectorXd decay = (-spectrum.eigenvalues.array().max(0.0) * t).exp();
    return spectrum.eigenvectors * coeff.cwiseProduct(decay);
}

Eigen::VectorXd diffuse_modes(const LaplacianMatrix& L, const Eigen::VectorXd& u0, double t, std::size_t dense_cap) {
    return diffuse_modes(dense_spectrum(L, true, dense_cap), u0, t);
}

NetworkStats network_stats(const YearNetwork& net) {
    const std::size_t n = net.n;
    NetworkStats st;
    st.degree.assign(n, 0);
    st.weighted_degree.assign(n, 0.0);
    st.betweenness.assign(n, 0.0);
    if (n == 0)
        return st;

    for (const auto& e : net.edges) {
        ++st.degree[e.i];
        ++st.degree[e.j];
        st.weighted_degree[e.i] += e.weight;
        st.weighted_degree[e.j] += e.weight;
    }
    const double nd = static_cast<double>(n);
    st.density = n > 1 ? 2.0 * static_cast<double>(net.edges.size()) / (nd * (nd - 1.0)) : 0.0;
    st.average_degree = 2.0 * static_cast<double>(net.edges.size()) / nd;

    const auto adj = adjacency(net);
    double clust = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
        const auto& nb = adj[v];
        const std::size_t k = nb.size();
        if (k < 2)
            continue;
        std::size_t links = 0;
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = a + 1; b < k; ++b)
                if (std::binary_search(adj[nb[a]].begin(), adj[nb[a]].end(), nb[b]))
                    ++links;
        clust += 2.0 * static_cast<double>(links) / (static_cast<double>(k) * static_cast<double>(k - 1));
    }
    st.clustering = clust / nd;

    // Brandes accumulation on the unweighted skeleton; path lengths come from the same BFS.
    double path_sum = 0.0;
    double pair_count = 0.0;
    std::vector<long> dist(n);
    std::vector<double> sigma(n), delta(n);
    std::vector<std::size_t> stack;
    std::vector<std::vector<std::size_t>> pred(n);
    for (std::size_t s = 0; s < n; ++s) {
        std::fill(dist.begin(), dist.end(), -1);
        std::fill(sigma.begin(), sigma.end(), 0.0);
        std::fill(delta.begin(), delta.end(), 0.0);
        for (auto& p : pred)
            p.clear();
        stack.clear();
        dist[s] = 0;
        sigma[s] = 1.0;
        std::queue<std::size_t> bfs;
        bfs.push(s);
        while (!bfs.empty()) {
            const auto v = bfs.front();
            bfs.pop();
            stack.push_back(v);
            for (auto w : adj[v]) {
                if (dist[w] < 0) {
                    dist[w] = dist[v] + 1;
                    bfs.push(w);
                }
                if (dist[w] == dist[v] + 1) {
                    sigma[w] += sigma[v];
                    pred[w].push_back(v);
                }
            }
        }
        for (std::size_t t = 0; t < n; ++t)
            if (t != s && dist[t] > 0) {
                path_sum += static_cast<double>(dist[t]);
                pair_count += 1.0;
            }
        while (!stack.empty()) {
            const auto w = stack.back();
            stack.pop_back();
            for (auto v : pred[w])
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            if (w != s)
                st.betweenness[w] += delta[w];
        }
    }
    st.average_path_length = pair_count > 0.0 ? path_sum / pair_count : 0.0;
    // Each unordered pair was counted from both endpoints.
    const double norm = n > 2 ? (nd - 1.0) * (nd - 2.0) : 1.0;
    for (auto& b : st.betweenness)
        b = n > 2 ? b / norm : 0.0;
    return st;
}

}  // namespace techdiff
