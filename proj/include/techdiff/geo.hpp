#pragma once

#include "techdiff/types.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace techdiff {

inline constexpr double kEarthRadiusKm = 6371.0;

using DistanceMatrix = Eigen::MatrixXd;

enum class DistanceKernel {
    Haversine,
    // Equirectangular projection about the sample's mean latitude, then planar distance.
    EuclideanProjection,
};

enum class AdopterReference {
    PreviousYear,
    SameYear,
};

void validate(const GeoPoint& p);

double haversine(const GeoPoint& a, const GeoPoint& b);

DistanceMatrix distance_matrix(const FirmTable& firms, DistanceKernel kernel = DistanceKernel::Haversine);

struct NearestAdopter {
    std::vector<std::size_t> firms;  // non-adopters at the target year
    std::vector<double> km;
};

// Distance from each non-adopter at `year` to the closest adopter at the reference year.
// Empty optional when the reference year has no adopters: the caller must skip that tech-year.
std::optional<NearestAdopter> nearest_adopter_distance(const AdoptionPanel& panel, const DistanceMatrix& dm,
                                                       TechId tech, int year,
                                                       AdopterReference ref = AdopterReference::PreviousYear);

// Per-firm minimum distance to any flagged firm, the firm itself included (adopters get 0).
// Entries are +inf when nobody is flagged.
std::vector<double> distance_to_set(const DistanceMatrix& dm, std::span<const std::uint8_t> flagged);

}  // namespace techdiff
