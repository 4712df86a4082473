#pragma once

#include "techdiff/errors.hpp"
#include "techdiff/simulate.hpp"
#include "techdiff/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace techdiff {

inline constexpr std::string_view kSchema = "techdiff/1";

// Shortest decimal text that reads back to the same double; "nan"/"inf" for non-finite values.
std::string format_double(double x);

// Delimited text with a header row. Lines starting with '#' and blank lines are skipped.
struct CsvTable {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;  // 1-based source line of each row

    std::size_t column(std::string_view name) const;
    [[noreturn]] void fail(std::size_t row, const std::string& message) const;
    double number(std::size_t row, std::size_t col) const;
    long integer(std::size_t row, std::size_t col) const;
};

CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& required);

// Writes "#schema=techdiff/1", the header row, then the rows; fields must not contain commas.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Pretty-printed JSON with a "schema" key added to objects.
void write_json(const std::filesystem::path& path, nlohmann::json doc);
nlohmann::json read_json(const std::filesystem::path& path);

FirmTable read_firms(const std::filesystem::path& path);
AdoptionPanel read_panel(const std::filesystem::path& path, const FirmTable& firms);
// One network per year in [first_year, last_year]; every year must have edges.
std::vector<YearNetwork> read_edges(const std::filesystem::path& path, const FirmTable& firms, int first_year,
                                    int last_year);

struct TreatedSet {
    std::vector<std::uint8_t> treated;
    std::vector<std::uint8_t> shock_seed;
};
TreatedSet read_treated(const std::filesystem::path& path, const FirmTable& firms);

void write_firms(const std::filesystem::path& path, const FirmTable& firms);
void write_panel(const std::filesystem::path& path, const AdoptionPanel& panel, const FirmTable& firms);
void write_edges(const std::filesystem::path& path, const std::vector<YearNetwork>& networks, const FirmTable& firms);
void write_treated(const std::filesystem::path& path, const TreatedSet& set, const FirmTable& firms);

// A dataset directory: firms.csv, panel.csv and edges.csv, plus treated.csv when present.
struct Dataset {
    FirmTable firms;
    AdoptionPanel panel;
    std::vector<YearNetwork> networks;
    TreatedSet shock;  // empty vectors when the directory has no treated.csv
};

Dataset read_dataset(const std::filesystem::path& dir);
Dataset to_dataset(const SyntheticDataset& ds);

// Writes the three data files, treated.csv and generation_log.json; returns the written file names.
std::vector<std::string> write_dataset(const std::filesystem::path& dir, const SyntheticDataset& ds);

nlohmann::json generation_log_json(const SyntheticDataset& ds);

// Reads keys of a config object into fields, remembering which keys were consumed so that
// finish() can reject the rest.
class ConfigFields {
public:
    ConfigFields(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object())
            throw ConfigError(where_ + " must be a JSON object");
    }

    template <class T>
    void get(const std::string& key, T& out) {
        used_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end())
            return;
        try {
            out = it->template get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    void finish() const {
        for (const auto& item : j_.items())
            if (!used_.count(item.key()))
                throw ConfigError("unknown config key '" + where_ + "." + item.key() + "'");
    }

private:
    const nlohmann::json& j_;
    std::string where_;
    std::set<std::string> used_;
};

// Config documents. Missing keys keep their defaults; unknown keys are rejected.
void to_json(nlohmann::json& j, const TechSpec& t);
void from_json(const nlohmann::json& j, TechSpec& t);
void to_json(nlohmann::json& j, const ShockSpec& s);
void from_json(const nlohmann::json& j, ShockSpec& s);
void to_json(nlohmann::json& j, const MultiplierScheme& m);
void from_json(const nlohmann::json& j, MultiplierScheme& m);
void to_json(nlohmann::json& j, const SimConfig& c);
void from_json(const nlohmann::json& j, SimConfig& c);

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// Digest of each named file in `dir`, keyed by file name.
std::map<std::string, std::string> digest_files(const std::filesystem::path& dir,
                                                const std::vector<std::string>& names);

}  // namespace techdiff
