#pragma once

#include "techdiff/geo.hpp"
#include "techdiff/types.hpp"

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace techdiff {

struct DecayBin {
    double distance = 0.0;  // bin midpoint, km
    double rate = 0.0;
    std::size_t count = 0;
};

struct DecayCurve {
    std::vector<DecayBin> bins;
};

enum class DecayForm { Exponential, Power, Linear };

std::string to_string(DecayForm form);

struct DecayFit {
    DecayForm form = DecayForm::Exponential;
    // Exponential: kappa. Power: alpha in u0 * d^-alpha. Linear: beta in u0 - beta * d.
    double rate = 0.0;
    double u0 = 0.0;
    double r_squared = 0.0;
    double rate_stderr = 0.0;
    double epsilon = 0.05;
    double d_star = 0.0;  // exponential only
    std::size_t bins_used = 0;
    std::size_t bins_dropped = 0;  // zero-rate (or zero-distance) bins left out of a log fit
};

struct AlternativeFits {
    DecayFit exponential;
    DecayFit power;
    DecayFit linear;
    DecayForm best = DecayForm::Exponential;
};

// Bins [k*w, (k+1)*w) by distance; bins whose midpoint lies beyond max_distance are left out.
DecayCurve bin_adoption_by_distance(std::span<const double> distances, std::span<const double> outcomes,
                                    double bin_width,
                                    double max_distance = std::numeric_limits<double>::infinity());

// Pooled firm-years at risk of adopting: firms without the technology at t-1, their distance to the
// nearest t-1 adopter, and whether they adopted by t. Years whose t-1 has no adopters are skipped.
struct HazardSample {
    std::vector<double> km;
    std::vector<double> adopted;
    std::vector<int> years_used;
};
HazardSample pooled_hazard_sample(const AdoptionPanel& panel, const DistanceMatrix& dm, TechId tech, int first_year,
                                  int last_year);

DecayFit fit_exponential(const DecayCurve& curve, double epsilon = 0.05);

double spatial_boundary(double kappa, double epsilon);

AlternativeFits fit_alternatives(const DecayCurve& curve, double epsilon = 0.05);

}  // namespace techdiff
