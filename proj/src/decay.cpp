#include "techdiff/decay.hpp"

#include "techdiff/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace techdiff {

namespace {

struct WeightedLine {
    double intercept = 0.0;
    double slope = 0.0;
    double r_squared = 0.0;
    double slope_stderr = 0.0;
};

WeightedLine weighted_line(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w) {
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double xbar = sx / sw;
    const double ybar = sy / sw;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - xbar;
        const double dy = y[i] - ybar;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    if (!(sxx > 0.0))
        throw EstimationError("decay fit needs at least two distinct distances");
    WeightedLine out;
    out.slope = sxy / sxx;
    out.intercept = ybar - out.slope * xbar;
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - out.intercept - out.slope * x[i];
        rss += w[i] * r * r;
    }
    out.r_squared = syy > 0.0 ? std::max(0.0, 1.0 - rss / syy) : 1.0;
    const double dof = static_cast<double>(x.size()) - 2.0;
    out.slope_stderr = dof > 0.0 ? std::sqrt(rss / dof / sxx) : 0.0;
    return out;
}

void check_curve(const DecayCurve& curve) {
    double prev = -std::numeric_limits<double>::infinity();
    for (const auto& b : curve.bins) {
        if (!(b.distance > prev))
            throw InputError("decay curve distances must be strictly increasing");
        if (!(b.rate >= 0.0 && b.rate <= 1.0))
            throw InputError("decay curve rate outside [0, 1]");
        if (b.count < 1)
            throw InputError("decay curve bin with zero count");
        prev = b.distance;
    }
}

}  // namespace

std::string to_string(DecayForm form) {
    switch (form) {
    case DecayForm::Exponential: return "exponential";
    case DecayForm::Power: return "power";
    case DecayForm::Linear: return "linear";
    }
    return "unknown";
}

DecayCurve bin_adoption_by_distance(std::span<const double> distances, std::span<const double> outcomes,
                                    double bin_width, double max_distance) {
    if (distances.empty())
        throw InputError("bin_adoption_by_distance: empty input");
    if (distances.size() != outcomes.size())
        throw InputError("bin_adoption_by_distance: distances and outcomes differ in length");
    if (!(bin_width > 0.0))
        throw InputError("bin_adoption_by_distance: bin width must be positive");

    std::map<long, std::pair<double, std::size_t>> acc;
    for (std::size_t i = 0; i < distances.size(); ++i) {
        const double d = distances[i];
        if (!(d >= 0.0) || !std::isfinite(d))
            throw InputError("bin_adoption_by_distance: distances must be finite and nonnegative");
        auto& slot = acc[static_cast<long>(std::floor(d / bin_width))];
        slot.first += outcomes[i];
        slot.second += 1;
    }
    DecayCurve curve;
    for (const auto& [k, v] : acc) {
        const double mid = (static_cast<double>(k) + 0.5) * bin_width;
        if (mid > max_distance)
            continue;
        curve.bins.push_back({mid, v.first / static_cast<double>(v.second), v.second});
    }
    return curve;
}

HazardSample pooled_hazard_sample(const AdoptionPanel& panel, const DistanceMatrix& dm, TechId tech, int first_year,
                                  int last_year) {
    if (static_cast<std::size_t>(dm.rows()) != panel.n_firms())
        throw InputError("distance matrix size does not match panel firm count");
    HazardSample out;
    for (int y = std::max(first_year, panel.first_year() + 1); y <= std::min(last_year, panel.last_year()); ++y) {
        if (panel.adopter_count(tech, y - 1) == 0)
            continue;
        auto prev = panel.row(tech, y - 1);
        auto cur = panel.row(tech, y);
        const auto d = distance_to_set(dm, prev);
        for (std::size_t i = 0; i < panel.n_firms(); ++i) {
            if (prev[i])
                continue;
            out.km.push_back(d[i]);
            out.adopted.push_back(cur[i] ? 1.0 : 0.0);
        }
        out.years_used.push_back(y);
    }
    return out;
}

double spatial_boundary(double kappa, double epsilon) {
    if (!(kappa > 0.0))
        throw DomainError("spatial boundary needs kappa > 0");
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw DomainError("spatial boundary needs epsilon in (0, 1)");
    return -std::log(epsilon) / kappa;
}

DecayFit fit_exponential(const DecayCurve& curve, double epsilon) {
    check_curve(curve);
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw DomainError("decay fit epsilon must lie in (0, 1)");
    std::vector<double> x, y, w;
    DecayFit fit;
    fit.form = DecayForm::Exponential;
    fit.epsilon = epsilon;
    for (const auto& b : curve.bins) {
        if (b.rate <= 0.0) {
            ++fit.bins_dropped;
            continue;
        }
        x.push_back(b.distance);
        y.push_back(std::log(b.rate));
        w.push_back(static_cast<double>(b.count));
    }
    if (x.size() < 3)
        throw InputError("exponential decay fit needs at least 3 bins with positive rate");
    const auto line = weighted_line(x, y, w);
    fit.rate = -line.slope;
    fit.u0 = std::exp(line.intercept);
    fit.r_squared = line.r_squared;
    fit.rate_stderr = line.slope_stderr;
    fit.bins_used = x.size();
    if (!(fit.rate > 0.0))
        throw EstimationError("no decay detected: fitted kappa = " + std::to_string(fit.rate));
    fit.d_star = spatial_boundary(fit.rate, epsilon);
    return fit;
}

AlternativeFits fit_alternatives(const DecayCurve& curve, double epsilon) {
    AlternativeFits out;
    out.exponential = fit_exponential(curve, epsilon);

    {
        std::vector<double> x, y, w;
        DecayFit& f = out.power;
        f.form = DecayForm::Power;
        f.epsilon = epsilon;
        for (const auto& b : curve.bins) {
            if (b.rate <= 0.0 || b.distance <= 0.0) {
                ++f.bins_dropped;
                continue;
            }
            x.push_back(std::log(b.distance));
            y.push_back(std::log(b.rate));
            w.push_back(static_cast<double>(b.count));
        }
        if (x.size() < 3)
            throw InputError("power-law fit needs at least 3 usable bins");
        const auto line = weighted_line(x, y, w);
        f.rate = -line.slope;
        f.u0 = std::exp(line.intercept);
        f.r_squared = line.r_squared;
        f.rate_stderr = line.slope_stderr;
        f.bins_used = x.size();
    }
    {
        std::vector<double> x, y, w;
        DecayFit& f = out.linear;
        f.form = DecayForm::Linear;
        f.epsilon = epsilon;
        for (const auto& b : curve.bins) {
            x.push_back(b.distance);
            y.push_back(b.rate);
            w.push_back(static_cast<double>(b.count));
        }
        const auto line = weighted_line(x, y, w);
        f.rate = -line.slope;
        f.u0 = line.intercept;
        f.r_squared = line.r_squared;
        f.rate_stderr = line.slope_stderr;
        f.bins_used = x.size();
    }

    out.best = DecayForm::Exponential;
    double best_r2 = out.exponential.r_squared;
    if (out.power.r_squared > best_r2) {
        out.best = DecayForm::Power;
        best_r2 = out.power.r_squared;
    }
    if (out.linear.r_squared > best_r2)
        out.best = DecayForm::Linear;
    return out;
}

}  // namespace techdiff
