#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace techdiff {

using TechId = std::size_t;

struct GeoPoint {
    double latitude = 0.0;
    double longitude = 0.0;
};

struct FirmTable {
    std::vector<long> ids;
    std::vector<GeoPoint> coords;

    std::size_t size() const { return coords.size(); }
};

// Cumulative adoption indicators stored tech-major, then year, then firm.
class AdoptionPanel {
public:
    AdoptionPanel() = default;
    AdoptionPanel(std::size_t n_firms, int first_year, int last_year, std::vector<std::string> techs);

    std::size_t n_firms() const { return n_firms_; }
    int first_year() const { return first_year_; }
    int last_year() const { return last_year_; }
    int n_years() const { return last_year_ - first_year_ + 1; }
    bool covers(int year) const { return year >= first_year_ && year <= last_year_; }
    const std::vector<std::string>& techs() const { return techs_; }
    std::size_t n_techs() const { return techs_.size(); }
    TechId tech_index(std::string_view name) const;

    bool adopted(TechId tech, int year, std::size_t firm) const { return data_[offset(tech, year) + firm] != 0; }
    void set(TechId tech, int year, std::size_t firm, bool value) { data_[offset(tech, year) + firm] = value ? 1 : 0; }

    std::span<const std::uint8_t> row(TechId tech, int year) const {
        return {data_.data() + offset(tech, year), n_firms_};
    }
    std::span<std::uint8_t> row(TechId tech, int year) {
        return {data_.data() + offset(tech, year), n_firms_};
    }

    std::size_t adopter_count(TechId tech, int year) const;
    double adoption_rate(TechId tech, int year) const;

    // Throws InputError if any firm un-adopts.
    void check_cumulative() const;

private:
    std::size_t offset(TechId tech, int year) const;

    std::size_t n_firms_ = 0;
    int first_year_ = 0;
    int last_year_ = -1;
    std::vector<std::string> techs_;
    std::vector<std::uint8_t> data_;
};

struct Edge {
    std::size_t i = 0;
    std::size_t j = 0;
    double weight = 0.0;
};

struct YearNetwork {
    int year = 0;
    std::size_t n = 0;
    std::vector<Edge> edges;
};

struct MultiplierScheme {
    double both_adopted = 1.0;
    double one_adopted = 0.5;
    double neither = 0.1;

    void validate() const;
};

}  // namespace techdiff
