#include "techdiff/types.hpp"

#include "techdiff/errors.hpp"

#include <algorithm>

namespace techdiff {

AdoptionPanel::AdoptionPanel(std::size_t n_firms, int first_year, int last_year, std::vector<std::string> techs)
    : n_firms_(n_firms), first_year_(first_year), last_year_(last_year), techs_(std::move(techs)) {
    if (last_year < first_year)
        throw InputError("adoption panel: last year precedes first year");
    data_.assign(techs_.size() * static_cast<std::size_t>(n_years()) * n_firms_, 0);
}

TechId AdoptionPanel::tech_index(std::string_view name) const {
    auto it = std::find(techs_.begin(), techs_.end(), name);
    if (it == techs_.end())
        throw InputError("unknown technology '" + std::string(name) + "'");
    return static_cast<TechId>(it - techs_.begin());
}

std::size_t AdoptionPanel::offset(TechId tech, int year) const {
    if (tech >= techs_.size())
        throw InputError("technology index out of range");
    if (!covers(year))
        throw InputError("year " + std::to_string(year) + " outside panel");
    return (tech * static_cast<std::size_t>(n_years()) + static_cast<std::size_t>(year - first_year_)) * n_firms_;
}

std::size_t AdoptionPanel::adopter_count(TechId tech, int year) const {
    auto r = row(tech, year);
    return static_cast<std::size_t>(std::count(r.begin(), r.end(), std::uint8_t{1}));
}

double AdoptionPanel::adoption_rate(TechId tech, int year) const {
    if (n_firms_ == 0)
        return 0.0;
    return static_cast<double>(adopter_count(tech, year)) / static_cast<double>(n_firms_);
}

void AdoptionPanel::check_cumulative() const {
    for (TechId k = 0; k < techs_.size(); ++k)
        for (int y = first_year_ + 1; y <= last_year_; ++y) {
            auto prev = row(k, y - 1);
            auto cur = row(k, y);
            for (std::size_t i = 0; i < n_firms_; ++i)
                if (prev[i] && !cur[i])
                    throw InputError("adoption panel not cumulative: tech " + techs_[k] + ", firm index " +
                                     std::to_string(i) + ", year " + std::to_string(y));
        }
}

void MultiplierScheme::validate() const {
    if (!(neither > 0.0 && neither <= one_adopted && one_adopted <= both_adopted))
        throw ConfigError("multiplier scheme must satisfy 0 < neither <= one_adopted <= both_adopted");
}

}  // namespace techdiff
