#include "techdiff/did.hpp"

#include "techdiff/errors.hpp"

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace techdiff {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int col(const DidPanel& p, int year) {
    if (!p.covers(year))
        throw InputError("year " + std::to_string(year) + " outside the panel " + std::to_string(p.first_year) + "-" +
                         std::to_string(p.last_year()));
    return year - p.first_year;
}

void require_window(const DidPanel& p, int first, int last) {
    col(p, first);
    col(p, last);
}

void require_variation(const DidPanel& p, int first, int last) {
    const auto block = p.outcome.middleCols(col(p, first), last - first + 1);
    if (block.size() == 0 || block.maxCoeff() == block.minCoeff())
        throw EstimationError("outcome shows no variation in the window (all adopted or none)");
}

// Observations of firm x year over [first, last], skipping cells where `keep` is false.
template <class Keep>
FeDesign window_design(const DidPanel& p, int first, int last, int n_regressors, Keep keep) {
    FeDesign d;
    std::vector<double> y;
    for (std::size_t i = 0; i < p.n_firms(); ++i)
        for (int year = first; year <= last; ++year) {
            const int t = col(p, year);
            if (!keep(i, t))
                continue;
            d.firm.push_back(i);
            d.year.push_back(static_cast<std::size_t>(t));
            y.push_back(p.outcome(static_cast<Eigen::Index>(i), t));
        }
    d.y = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    d.X.resize(d.y.size(), n_regressors);
    return d;
}

double treated_post(const DidPanel& p, std::size_t i, std::size_t t, const EventSpec& spec) {
    const int year = p.first_year + static_cast<int>(t);
    return (p.treated[i] && year >= spec.post_first) ? 1.0 : 0.0;
}

std::size_t distinct(std::span<const std::size_t> v) { return std::set<std::size_t>(v.begin(), v.end()).size(); }

}  // namespace

void EventSpec::validate() const {
    if (pre_first > pre_last)
        throw InputError("pre window is empty");
    if (pre_last >= event_year)
        throw InputError("pre window must end before the event year");
    if (post_first != event_year)
        throw InputError("post window must start at the event year");
    if (post_last < post_first)
        throw InputError("post window is empty");
}

std::string to_string(DidMethod method) {
    switch (method) {
        case DidMethod::Traditional: return "traditional";
        case DidMethod::Spatial: return "spatial";
        case DidMethod::Network: return "network";
    }
    return "unknown";
}

DidPanel make_did_panel(const AdoptionPanel& panel, TechId tech, const DistanceMatrix& dm,
                        std::span<const std::uint8_t> treated) {
    const std::size_t n = panel.n_firms();
    if (treated.size() != n)
        throw InputError("treated flags cover " + std::to_string(treated.size()) + " firms, panel has " +
                         std::to_string(n));
    if (static_cast<std::size_t>(dm.rows()) != n || static_cast<std::size_t>(dm.cols()) != n)
        throw InputError("distance matrix does not match the panel's firm count");
    if (tech >= panel.n_techs())
        throw InputError("technology index out of range");
    DidPanel p;
    p.first_year = panel.first_year();
    const int T = panel.n_years();
    const auto rows = static_cast<Eigen::Index>(n);
    p.outcome.resize(rows, T);
    p.dmin = Eigen::MatrixXd::Constant(rows, T, kNaN);
    p.exposure = Eigen::MatrixXd::Constant(rows, T, kNaN);
    p.treated.assign(treated.begin(), treated.end());
    for (int t = 0; t < T; ++t) {
        const int year = panel.first_year() + t;
        for (std::size_t i = 0; i < n; ++i)
            p.outcome(static_cast<Eigen::Index>(i), t) = panel.adopted(tech, year, i) ? 1.0 : 0.0;
        if (t == 0 || panel.adopter_count(tech, year - 1) == 0)
            continue;
        const auto d = distance_to_set(dm, panel.row(tech, year - 1));
        for (std::size_t i = 0; i < n; ++i)
            p.dmin(static_cast<Eigen::Index>(i), t) = d[i];
    }
    return p;
}

void attach_network(DidPanel& did, const AdoptionPanel& panel, TechId tech, const std::vector<YearNetwork>& networks,
                    const MultiplierScheme& m) {
    const int T = panel.n_years();
    if (static_cast<int>(networks.size()) != T)
        throw InputError("expected one network per panel year");
    if (did.n_firms() != panel.n_firms() || did.first_year != panel.first_year())
        throw InputError("event-study panel does not match the adoption panel");
    did.lambda2.assign(static_cast<std::size_t>(T), 0.0);
    did.exposure = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(panel.n_firms()), T, kNaN);
    for (int t = 0; t < T; ++t) {
        const int year = panel.first_year() + t;
        if (networks[static_cast<std::size_t>(t)].year != year || networks[static_cast<std::size_t>(t)].n != panel.n_firms())
            throw InputError("network for " + std::to_string(year) + " is missing or has the wrong size");
        const auto weighted = tech_weighted_network(networks[static_cast<std::size_t>(t)], panel, tech, year, m);
        did.lambda2[static_cast<std::size_t>(t)] = lambda2_lanczos(laplacian_from_edges(weighted.n, weighted.edges)).lambda2;
        if (t == 0)
            continue;
        const auto prev = tech_weighted_network(networks[static_cast<std::size_t>(t - 1)], panel, tech, year - 1, m);
        Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(panel.n_firms()));
        for (const auto& e : prev.edges) {
            s(static_cast<Eigen::Index>(e.i)) += e.weight;
            s(static_cast<Eigen::Index>(e.j)) += e.weight;
        }
        did.exposure.col(t) = s;
    }
}

std::size_t firm_count(const DidPanel& p) { return p.n_firms(); }

DidPanel resample_firms(const DidPanel& p, std::span<const std::size_t> firms) {
    DidPanel out;
    out.first_year = p.first_year;
    out.lambda2 = p.lambda2;
    const auto m = static_cast<Eigen::Index>(firms.size());
    out.outcome.resize(m, p.outcome.cols());
    out.dmin.resize(m, p.dmin.cols());
    out.exposure.resize(m, p.exposure.cols());
    out.treated.resize(firms.size());
    for (Eigen::Index k = 0; k < m; ++k) {
        const auto i = static_cast<Eigen::Index>(firms[static_cast<std::size_t>(k)]);
        if (static_cast<std::size_t>(i) >= p.n_firms())
            throw InputError("resampled firm index out of range");
        out.outcome.row(k) = p.outcome.row(i);
        if (p.dmin.size())
            out.dmin.row(k) = p.dmin.row(i);
        if (p.exposure.size())
            out.exposure.row(k) = p.exposure.row(i);
        out.treated[static_cast<std::size_t>(k)] = p.treated[static_cast<std::size_t>(i)];
    }
    return out;
}

void within_transform(Eigen::MatrixXd& M, std::span<const std::size_t> firm, std::span<const std::size_t> year,
                      const Eigen::VectorXd& w, bool year_effects, double tol) {
    const auto n = M.rows();
    if (static_cast<Eigen::Index>(firm.size()) != n || (year_effects && static_cast<Eigen::Index>(year.size()) != n))
        throw InputError("group labels do not match the number of observations");
    const bool weighted = w.size() != 0;
    if (weighted && w.size() != n)
        throw InputError("weights do not match the number of observations");

    auto sweep = [&](std::span<const std::size_t> group) {
        const std::size_t G = group.empty() ? 0 : *std::max_element(group.begin(), group.end()) + 1;
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(G), M.cols());
        Eigen::VectorXd mass = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(G));
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto g = static_cast<Eigen::Index>(group[static_cast<std::size_t>(r)]);
            const double wr = weighted ? w(r) : 1.0;
            sums.row(g) += wr * M.row(r);
            mass(g) += wr;
        }
        double moved = 0.0;
        for (Eigen::Index g = 0; g < static_cast<Eigen::Index>(G); ++g)
            if (mass(g) > 0.0) {
                sums.row(g) /= mass(g);
                moved = std::max(moved, sums.row(g).cwiseAbs().maxCoeff());
            }
        for (Eigen::Index r = 0; r < n; ++r)
            M.row(r) -= sums.row(static_cast<Eigen::Index>(group[static_cast<std::size_t>(r)]));
        return moved;
    };

    const double scale = std::max(1.0, M.size() ? M.cwiseAbs().maxCoeff() : 0.0);
    if (!year_effects) {
        sweep(firm);
        return;
    }
    constexpr int kMaxSweeps = 100000;
    for (int it = 0; it < kMaxSweeps; ++it) {
        const double moved = std::max(sweep(firm), sweep(year));
        if (moved <= tol * scale)
            return;
    }
    throw EstimationError("fixed-effects demeaning did not converge");
}

FeFit fit_fe(const FeDesign& d) {
    const auto n = d.y.size();
    const auto k = d.X.cols();
    if (n == 0)
        throw EstimationError("no observations");
    if (d.X.rows() != n || static_cast<Eigen::Index>(d.firm.size()) != n ||
        (d.year_effects && static_cast<Eigen::Index>(d.year.size()) != n))
        throw InputError("design arrays disagree on the number of observations");
    if (static_cast<Eigen::Index>(d.names.size()) != k)
        throw InputError("every regressor needs a name");
    if (d.w.size() != 0) {
        if (d.w.size() != n)
            throw InputError("weights do not match the number of observations");
        if ((d.w.array() <= 0.0).any() || !d.w.allFinite())
            throw InputError("regression weights must be positive and finite");
    }
    if (!d.y.allFinite() || !d.X.allFinite())
        throw InputError("regression inputs contain non-finite values");

    Eigen::MatrixXd M(n, k + 1);
    M.col(0) = d.y;
    M.rightCols(k) = d.X;
    const Eigen::MatrixXd raw = M;
    within_transform(M, d.firm, d.year, d.w, d.year_effects);
    const Eigen::VectorXd sw = d.w.size() ? Eigen::VectorXd(d.w.cwiseSqrt()) : Eigen::VectorXd::Ones(n);
    M = sw.asDiagonal() * M;
    const Eigen::MatrixXd rawS = sw.asDiagonal() * raw;

    FeFit fit;
    fit.n_obs = static_cast<std::size_t>(n);
    fit.tss = M.col(0).squaredNorm();
    if (!(fit.tss > 1e-20 * std::max(rawS.col(0).squaredNorm(), 1e-300)))
        throw EstimationError("outcome has no variation left after the fixed effects");

    // Column-by-column rank check so the failing regressor can be named.
    Eigen::MatrixXd Xn(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const double before = rawS.col(j + 1).norm();
        const double after = M.col(j + 1).norm();
        if (!(after > 1e-9 * before) || after == 0.0)
            throw EstimationError("regressor '" + d.names[static_cast<std::size_t>(j)] +
                                  "' is absorbed by the fixed effects");
        Xn.col(j) = M.col(j + 1) / after;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xn.leftCols(j + 1));
        qr.setThreshold(1e-10);
        if (qr.rank() < j + 1)
            throw EstimationError("regressor '" + d.names[static_cast<std::size_t>(j)] +
                                  "' is collinear with the other regressors");
    }

    const Eigen::MatrixXd X = M.rightCols(k);
    const Eigen::VectorXd y = M.col(0);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    fit.beta = qr.solve(y);
    fit.rss = (y - X * fit.beta).squaredNorm();
    fit.r2_within = 1.0 - fit.rss / fit.tss;

    const auto firms = distinct(d.firm);
    const auto years = d.year_effects ? distinct(d.year) : 1;
    fit.df_resid = static_cast<int>(n) - static_cast<int>(k) - static_cast<int>(firms) - static_cast<int>(years - 1);
    if (fit.df_resid <= 0)
        throw EstimationError("no residual degrees of freedom");
    const Eigen::MatrixXd xtx = X.transpose() * X;
    fit.cov = (fit.rss / fit.df_resid) * xtx.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    return fit;
}

DidEstimate traditional_did(const DidPanel& p, const EventSpec& spec) {
    spec.validate();
    require_window(p, spec.pre_first, spec.post_last);
    require_variation(p, spec.pre_first, spec.post_last);
    auto d = window_design(p, spec.pre_first, spec.post_last, 1, [](std::size_t, int) { return true; });
    for (Eigen::Index r = 0; r < d.y.size(); ++r)
        d.X(r, 0) = treated_post(p, d.firm[static_cast<std::size_t>(r)], d.year[static_cast<std::size_t>(r)], spec);
    d.names = {"treated_x_post"};
    const auto fit = fit_fe(d);
    return {DidMethod::Traditional, 100.0 * fit.beta(0), kNaN, kNaN, fit.n_obs};
}

DidEstimate spatial_did(const DidPanel& p, const EventSpec& spec, double kappa_hat) {
    spec.validate();
    if (!(kappa_hat > 0.0) || !std::isfinite(kappa_hat))
        throw DomainError("spatial DID needs a positive decay rate");
    require_window(p, spec.pre_first, spec.post_last);
    require_variation(p, spec.pre_first, spec.post_last);
    // Firm-years whose weight underflows carry no information and are left out with the undefined ones.
    auto d = window_design(p, spec.pre_first, spec.post_last, 2, [&](std::size_t i, int t) {
        const double km = p.dmin(static_cast<Eigen::Index>(i), t);
        return std::isfinite(km) && std::exp(-kappa_hat * km) > 0.0;
    });
    if (d.y.size() == 0)
        throw EstimationError("no nearest-adopter distances in the window");
    d.w.resize(d.y.size());
    for (Eigen::Index r = 0; r < d.y.size(); ++r) {
        const auto i = d.firm[static_cast<std::size_t>(r)];
        const auto t = d.year[static_cast<std::size_t>(r)];
        const double km = p.dmin(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
        d.X(r, 0) = treated_post(p, i, t, spec);
        d.X(r, 1) = km;
        d.w(r) = std::exp(-kappa_hat * km);
    }
    d.names = {"treated_x_post", "dmin_km"};
    const auto fit = fit_fe(d);
    return {DidMethod::Spatial, 100.0 * fit.beta(0), kNaN, kNaN, fit.n_obs};
}

DidEstimate network_did(const DidPanel& p, const EventSpec& spec, int base_year) {
    spec.validate();
    require_window(p, spec.pre_first, spec.post_last);
    if (static_cast<int>(p.lambda2.size()) != p.n_years())
        throw InputError("network DID needs a lambda2 value for every panel year");
    if (!p.covers(base_year))
        throw DomainError("lambda2 baseline year " + std::to_string(base_year) + " is outside the panel");
    const double base = p.lambda2[static_cast<std::size_t>(col(p, base_year))];
    if (!(base > 0.0))
        throw DomainError("baseline lambda2 must be positive");
    require_variation(p, spec.pre_first, spec.post_last);
    auto d = window_design(p, spec.pre_first, spec.post_last, 1, [](std::size_t, int) { return true; });
    for (Eigen::Index r = 0; r < d.y.size(); ++r) {
        const auto t = d.year[static_cast<std::size_t>(r)];
        const double lam = p.lambda2[t];
        if (!(lam > 0.0))
            throw DomainError("lambda2 must be positive in every window year");
        d.y(r) /= lam / base;
        d.X(r, 0) = treated_post(p, d.firm[static_cast<std::size_t>(r)], t, spec);
    }
    d.names = {"treated_x_post"};
    const auto fit = fit_fe(d);
    return {DidMethod::Network, 100.0 * fit.beta(0), kNaN, kNaN, fit.n_obs};
}

double relative_bias(double traditional, double spatial) {
    if (traditional == 0.0)
        throw DomainError("relative bias is undefined for a zero traditional estimate");
    return (traditional - spatial) / traditional;
}

double f_upper_tail(double f, double df1, double df2) {
    if (!(df1 > 0.0 && df2 > 0.0))
        throw DomainError("F distribution needs positive degrees of freedom");
    if (!(f > 0.0))
        return 1.0;
    boost::math::fisher_f_distribution<double> dist(df1, df2);
    return boost::math::cdf(boost::math::complement(dist, f));
}

PretrendResult pretrend_test(const DidPanel& p, const EventSpec& spec, int n_leads) {
    spec.validate();
    const int pre_len = spec.pre_last - spec.pre_first + 1;
    if (n_leads < 1 || n_leads > pre_len)
        throw InputError("number of leads must lie in [1, " + std::to_string(pre_len) + "]");
    const int earliest = spec.event_year - n_leads;
    if (earliest <= p.first_year)
        throw InputError("insufficient pre years: leads reach " + std::to_string(earliest) +
                         " but the panel starts in " + std::to_string(p.first_year));
    require_window(p, p.first_year, spec.post_last);
    require_variation(p, p.first_year, spec.post_last);

    auto d = window_design(p, p.first_year, spec.post_last, n_leads + 1, [](std::size_t, int) { return true; });
    for (Eigen::Index r = 0; r < d.y.size(); ++r) {
        const auto i = d.firm[static_cast<std::size_t>(r)];
        const auto t = d.year[static_cast<std::size_t>(r)];
        const int year = p.first_year + static_cast<int>(t);
        for (int k = 1; k <= n_leads; ++k)
            d.X(r, k - 1) = (p.treated[i] && year == spec.event_year - k) ? 1.0 : 0.0;
        d.X(r, n_leads) = treated_post(p, i, t, spec);
    }
    for (int k = 1; k <= n_leads; ++k)
        d.names.push_back("lead_" + std::to_string(spec.event_year - k));
    d.names.push_back("treated_x_post");
    const auto full = fit_fe(d);

    FeDesign r = d;
    r.X = d.X.rightCols(1);
    r.names = {"treated_x_post"};
    const auto restricted = fit_fe(r);

    PretrendResult res;
    res.n_obs = full.n_obs;
    res.df1 = n_leads;
    res.df2 = full.df_resid;
    res.f_stat = std::max(0.0, (restricted.rss - full.rss) / n_leads) / (full.rss / full.df_resid);
    res.p_value = f_upper_tail(res.f_stat, res.df1, res.df2);
    boost::math::students_t_distribution<double> tdist(full.df_resid);
    for (int k = 1; k <= n_leads; ++k) {
        LeadEstimate l;
        l.year = spec.event_year - k;
        l.coef = 100.0 * full.beta(k - 1);
        l.stderr_pp = 100.0 * std::sqrt(full.cov(k - 1, k - 1));
        const double tstat = l.stderr_pp > 0.0 ? std::abs(l.coef / l.stderr_pp) : 0.0;
        l.p_value = 2.0 * boost::math::cdf(boost::math::complement(tdist, tstat));
        res.leads.push_back(l);
    }
    return res;
}

std::vector<LeadEstimate> dynamic_effects(const DidPanel& p, const EventSpec& spec) {
    spec.validate();
    require_window(p, p.first_year, spec.post_last);
    require_variation(p, p.first_year, spec.post_last);
    std::vector<int> years;
    for (int year = p.first_year; year <= spec.post_last; ++year)
        if (year != spec.pre_last)
            years.push_back(year);
    auto d = window_design(p, p.first_year, spec.post_last, static_cast<int>(years.size()),
                           [](std::size_t, int) { return true; });
    d.X.setZero();
    for (Eigen::Index r = 0; r < d.y.size(); ++r) {
        const auto i = d.firm[static_cast<std::size_t>(r)];
        const int year = p.first_year + static_cast<int>(d.year[static_cast<std::size_t>(r)]);
        const auto it = std::find(years.begin(), years.end(), year);
        if (p.treated[i] && it != years.end())
            d.X(r, it - years.begin()) = 1.0;
    }
    for (int year : years)
        d.names.push_back("treated_x_" + std::to_string(year));
    const auto fit = fit_fe(d);
    boost::math::students_t_distribution<double> tdist(fit.df_resid);
    std::vector<LeadEstimate> out;
    for (int year = p.first_year; year <= spec.post_last; ++year) {
        LeadEstimate e;
        e.year = year;
        const auto it = std::find(years.begin(), years.end(), year);
        if (it != years.end()) {
            const auto c = it - years.begin();
            e.coef = 100.0 * fit.beta(c);
            e.stderr_pp = 100.0 * std::sqrt(fit.cov(c, c));
            const double tstat = e.stderr_pp > 0.0 ? std::abs(e.coef / e.stderr_pp) : 0.0;
            e.p_value = 2.0 * boost::math::cdf(boost::math::complement(tdist, tstat));
        }
        out.push_back(e);
    }
    return out;
}

std::optional<EventSpec> placebo_window(const EventSpec& actual, int placebo_year, int first_year, int last_year) {
    const int E = actual.event_year;
    if (placebo_year == E)
        return actual;
    EventSpec s;
    s.event_year = placebo_year;
    s.post_first = placebo_year;
    s.pre_last = placebo_year - 1;
    if (placebo_year < E) {
        s.pre_first = std::max(first_year, placebo_year - 3);
        s.post_last = std::min(placebo_year + 3, E - 1);
    } else {
        s.pre_first = std::max(E, placebo_year - 3);
        s.post_last = std::min(placebo_year + 3, last_year);
    }
    if (s.pre_last - s.pre_first + 1 < 2 || s.post_last < s.post_first || placebo_year > last_year)
        return std::nullopt;
    return s;
}

DidEstimate bootstrap_did(const DidPanel& p, const EventSpec& spec, DidMethod method, const BootstrapOptions& boot,
                          double kappa_hat, int base_year) {
    auto stat = [&](const DidPanel& q) {
        switch (method) {
            case DidMethod::Traditional: return traditional_did(q, spec).effect;
            case DidMethod::Spatial: return spatial_did(q, spec, kappa_hat).effect;
            case DidMethod::Network: return network_did(q, spec, base_year).effect;
        }
        return kNaN;
    };
    DidEstimate est;
    switch (method) {
        case DidMethod::Traditional: est = traditional_did(p, spec); break;
        case DidMethod::Spatial: est = spatial_did(p, spec, kappa_hat); break;
        case DidMethod::Network: est = network_did(p, spec, base_year); break;
    }
    const auto res = cluster_bootstrap(p, stat, boot);
    est.ci_low = res.ci_low;
    est.ci_high = res.ci_high;
    return est;
}

std::size_t firm_count(const PanelSet& s) {
    if (s.panels.empty())
        throw InputError("panel set is empty");
    const std::size_t n = s.panels.front().n_firms();
    for (const auto& p : s.panels)
        if (p.n_firms() != n)
            throw InputError("panels in a set must cover the same firms");
    return n;
}

PanelSet resample_firms(const PanelSet& s, std::span<const std::size_t> firms) {
    PanelSet out;
    out.kappa_hat = s.kappa_hat;
    out.panels.reserve(s.panels.size());
    for (const auto& p : s.panels)
        out.panels.push_back(resample_firms(p, firms));
    return out;
}

double average_effect(const PanelSet& s, const EventSpec& spec, DidMethod method, int base_year) {
    if (s.panels.empty())
        throw InputError("panel set is empty");
    if (method == DidMethod::Spatial && s.kappa_hat.size() != s.panels.size())
        throw InputError("spatial estimates need one kappa per panel");
    double sum = 0.0;
    for (std::size_t k = 0; k < s.panels.size(); ++k) {
        switch (method) {
            case DidMethod::Traditional: sum += traditional_did(s.panels[k], spec).effect; break;
            case DidMethod::Spatial: sum += spatial_did(s.panels[k], spec, s.kappa_hat[k]).effect; break;
            case DidMethod::Network: sum += network_did(s.panels[k], spec, base_year).effect; break;
        }
    }
    return sum / static_cast<double>(s.panels.size());
}

DidEstimate bootstrap_average(const PanelSet& s, const EventSpec& spec, DidMethod method, const BootstrapOptions& boot,
                              int base_year) {
    const auto res = cluster_bootstrap(
        s, [&](const PanelSet& q) { return average_effect(q, spec, method, base_year); }, boot);
    DidEstimate est;
    est.method = method;
    est.effect = res.point;
    est.ci_low = res.ci_low;
    est.ci_high = res.ci_high;
    for (const auto& p : s.panels)
        est.n_obs += p.n_firms() * static_cast<std::size_t>(spec.post_last - spec.pre_first + 1);
    return est;
}

std::vector<PlaceboResult> placebo_test(const PanelSet& s, const EventSpec& actual, const std::vector<int>& years,
                                        const BootstrapOptions& boot, std::vector<std::string>* warnings) {
    firm_count(s);
    int first = s.panels.front().first_year, last = s.panels.front().last_year();
    for (const auto& p : s.panels) {
        first = std::max(first, p.first_year);
        last = std::min(last, p.last_year());
    }
    std::vector<PlaceboResult> out;
    for (int year : years) {
        const auto window = placebo_window(actual, year, first, last);
        if (!window) {
            if (warnings)
                warnings->push_back("placebo year " + std::to_string(year) +
                                    " skipped: fewer than two pre years or no post year inside the panel");
            continue;
        }
        PlaceboResult r;
        r.year = year;
        r.actual = year == actual.event_year;
        r.window = *window;
        r.traditional = bootstrap_average(s, *window, DidMethod::Traditional, boot);
        r.spatial = bootstrap_average(s, *window, DidMethod::Spatial, boot);
        out.push_back(r);
    }
    return out;
}

std::vector<PlaceboResult> placebo_test(const DidPanel& p, const EventSpec& actual, const std::vector<int>& years,
                                        double kappa_hat, const BootstrapOptions& boot,
                                        std::vector<std::string>* warnings) {
    return placebo_test(PanelSet{{p}, {kappa_hat}}, actual, years, boot, warnings);
}

DualChannelR2 dual_channel_r2(const DidPanel& p) {
    if (static_cast<int>(p.lambda2.size()) != p.n_years() || p.exposure.cols() != p.n_years() ||
        p.exposure.rows() != p.outcome.rows())
        throw InputError("dual-channel regression needs lambda2 and network exposure for every year");
    auto base = window_design(p, p.first_year, p.last_year(), 3, [&](std::size_t i, int t) {
        const auto r = static_cast<Eigen::Index>(i);
        return std::isfinite(p.dmin(r, t)) && std::isfinite(p.exposure(r, t));
    });
    if (base.y.size() == 0)
        throw EstimationError("no firm-years with both spatial and network regressors");
    base.year_effects = false;
    for (Eigen::Index r = 0; r < base.y.size(); ++r) {
        const auto i = static_cast<Eigen::Index>(base.firm[static_cast<std::size_t>(r)]);
        const auto t = static_cast<Eigen::Index>(base.year[static_cast<std::size_t>(r)]);
        base.X(r, 0) = p.dmin(i, t);
        base.X(r, 1) = p.exposure(i, t);
        base.X(r, 2) = p.lambda2[static_cast<std::size_t>(t)];
    }
    base.names = {"dmin_km", "network_exposure", "lambda2"};

    auto subset = [&](std::vector<Eigen::Index> cols) {
        FeDesign d = base;
        d.X.resize(base.X.rows(), static_cast<Eigen::Index>(cols.size()));
        d.names.clear();
        for (std::size_t c = 0; c < cols.size(); ++c) {
            d.X.col(static_cast<Eigen::Index>(c)) = base.X.col(cols[c]);
            d.names.push_back(base.names[static_cast<std::size_t>(cols[c])]);
        }
        return fit_fe(d).r2_within;
    };
    DualChannelR2 r;
    r.n_obs = static_cast<std::size_t>(base.y.size());
    r.r2_spatial = subset({0});
    r.r2_network = subset({1, 2});
    r.r2_both = subset({0, 1, 2});
    r.improvement = r.r2_both - std::max(r.r2_spatial, r.r2_network);
    return r;
}

}  // namespace techdiff
