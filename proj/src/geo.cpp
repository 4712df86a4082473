#include "techdiff/geo.hpp"

#include "techdiff/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace techdiff {

namespace {

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

void validate(const GeoPoint& p) {
    if (!(p.latitude >= -90.0 && p.latitude <= 90.0))
        throw DomainError("latitude " + std::to_string(p.latitude) + " outside [-90, 90]");
    if (!(p.longitude >= -180.0 && p.longitude <= 180.0))
        throw DomainError("longitude " + std::to_string(p.longitude) + " outside [-180, 180]");
}

double haversine(const GeoPoint& a, const GeoPoint& b) {
    validate(a);
    validate(b);
    const double phi1 = deg2rad(a.latitude);
    const double phi2 = deg2rad(b.latitude);
    const double dphi = phi2 - phi1;
    const double dlambda = deg2rad(b.longitude - a.longitude);
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlambda / 2.0);
    double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    h = std::clamp(h, 0.0, 1.0);
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

DistanceMatrix distance_matrix(const FirmTable& firms, DistanceKernel kernel) {
    const auto n = static_cast<Eigen::Index>(firms.size());
    if (n < 2)
        throw InputError("distance matrix needs at least 2 firms");
    for (const auto& p : firms.coords)
        validate(p);

    DistanceMatrix dm = DistanceMatrix::Zero(n, n);
    if (kernel == DistanceKernel::Haversine) {
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double d = haversine(firms.coords[i], firms.coords[j]);
                dm(i, j) = d;
                dm(j, i) = d;
            }
        return dm;
    }

    double mean_lat = 0.0;
    for (const auto& p : firms.coords)
        mean_lat += p.latitude;
    mean_lat /= static_cast<double>(n);
    const double cos0 = std::cos(deg2rad(mean_lat));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const auto& a = firms.coords[i];
            const auto& b = firms.coords[j];
            double dlon = b.longitude - a.longitude;
            if (dlon > 180.0)
                dlon -= 360.0;
            if (dlon < -180.0)
                dlon += 360.0;
            const double x = kEarthRadiusKm * deg2rad(dlon) * cos0;
            const double y = kEarthRadiusKm * deg2rad(b.latitude - a.latitude);
            const double d = std::hypot(x, y);
            dm(i, j) = d;
            dm(j, i) = d;
        }
    return dm;
}

std::vector<double> distance_to_set(const DistanceMatrix& dm, std::span<const std::uint8_t> flagged) {
    const auto n = static_cast<std::size_t>(dm.rows());
    if (flagged.size() != n)
        throw InputError("distance_to_set: flag vector length does not match distance matrix");
    std::vector<std::size_t> members;
    for (std::size_t j = 0; j < n; ++j)
        if (flagged[j])
            members.push_back(j);

    std::vector<double> out(n, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i) {
        if (flagged[i]) {
            out[i] = 0.0;
            continue;
        }
        double best = out[i];
        for (auto j : members)
            best = std::min(best, dm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        out[i] = best;
    }
    return out;
}

std::optional<NearestAdopter> nearest_adopter_distance(const AdoptionPanel& panel, const DistanceMatrix& dm,
                                                       TechId tech, int year, AdopterReference ref) {
    if (static_cast<std::size_t>(dm.rows()) != panel.n_firms())
        throw InputError("distance matrix size does not match panel firm count");
    const int ref_year = ref == AdopterReference::PreviousYear ? year - 1 : year;
    if (!panel.covers(year) || !panel.covers(ref_year))
        throw InputError("nearest adopter distance: year " + std::to_string(year) + " needs panel coverage of " +
                         std::to_string(ref_year));

    auto adopters = panel.row(tech, ref_year);
    if (panel.adopter_count(tech, ref_year) == 0)
        return std::nullopt;

    auto current = panel.row(tech, year);
    auto all = distance_to_set(dm, adopters);
    NearestAdopter out;
    for (std::size_t i = 0; i < panel.n_firms(); ++i) {
        if (current[i])
            continue;
        out.firms.push_back(i);
        out.km.push_back(all[i]);
    }
    return out;
}

}  // namespace techdiff
