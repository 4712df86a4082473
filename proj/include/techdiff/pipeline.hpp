#pragma once

#include "techdiff/bootstrap.hpp"
#include "techdiff/decay.hpp"
#include "techdiff/did.hpp"
#include "techdiff/io.hpp"
#include "techdiff/simulate.hpp"
#include "techdiff/spectral.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace techdiff {

struct DecayOptions {
    double bin_width_km = 5.0;
    double max_distance_km = 100.0;
};

struct SpectralOptions {
    std::size_t dense_cap = kDefaultDenseCap;
    double tol = 1e-10;
};

struct EventOptions {
    EventSpec spec;
    int n_leads = 3;
    int base_year = 2019;
    std::vector<int> placebo_years{2015, 2017, 2020, 2022};
};

// Everything a run depends on. One root seed drives both the generator and the bootstrap.
struct RunConfig {
    std::uint64_t seed = 42;
    double epsilon = 0.05;  // spillover boundary threshold and mixing-time accuracy
    MultiplierScheme multiplier;
    SimConfig simulation;
    DecayOptions decay;
    SpectralOptions spectral;
    EventOptions event;
    BootstrapOptions bootstrap;

    // Copies the root seed and multiplier into the simulation and bootstrap blocks.
    void resolve();
    void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);

struct TechDecay {
    std::string tech;
    int first_year = 0;
    int last_year = 0;
    DecayCurve curve;
    AlternativeFits fits;
};

struct Lambda2Series {
    std::string tech;  // "network" for the unweighted supply network
    std::vector<int> years;
    std::vector<double> lambda2;
    std::vector<int> iterations;  // 0 where the dense solver was used
    std::vector<double> adoption;  // empty for the unweighted network
};

struct TechEvent {
    std::string tech;
    double kappa_hat = 0.0;
    DidEstimate traditional;
    DidEstimate spatial;
    DidEstimate network;
    double bias = 0.0;
    std::optional<PretrendResult> pretrend;
    std::vector<LeadEstimate> dynamic;
    std::optional<DualChannelR2> dual;
};

struct EventStudy {
    std::vector<TechEvent> techs;
    DidEstimate average_traditional;
    DidEstimate average_spatial;
    DidEstimate average_network;
    double average_bias = 0.0;
    std::vector<PlaceboResult> placebos;
    std::vector<std::pair<std::string, std::string>> skipped;  // tech, reason
    std::vector<std::string> warnings;
};

std::vector<TechDecay> decay_stage(const Dataset& data, const RunConfig& cfg);
std::vector<Lambda2Series> spectral_stage(const Dataset& data, const RunConfig& cfg);
EventStudy event_stage(const Dataset& data, const RunConfig& cfg, const std::vector<TechDecay>& decay);

// Each writer returns the names of the files it created in `out`.
std::vector<std::string> write_decay(const std::filesystem::path& out, const std::vector<TechDecay>& fits,
                                     const RunConfig& cfg);
std::vector<std::string> write_spectral(const std::filesystem::path& out, const std::vector<Lambda2Series>& series,
                                        const RunConfig& cfg);
std::vector<std::string> write_event_study(const std::filesystem::path& out, const EventStudy& study);

// Commands. Without a dataset directory the dataset is generated from cfg.simulation. Every command
// writes config_echo.json and digests.json (SHA-256 of every other file it wrote).
void cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out);
void cmd_replicate(const RunConfig& cfg, const std::optional<std::filesystem::path>& data,
                   const std::filesystem::path& out);
void cmd_spectral(const RunConfig& cfg, const std::optional<std::filesystem::path>& data,
                  const std::filesystem::path& out);
void cmd_fit_decay(const RunConfig& cfg, const std::optional<std::filesystem::path>& data,
                   const std::filesystem::path& out);
void cmd_event_study(const RunConfig& cfg, const std::optional<std::filesystem::path>& data,
                     const std::filesystem::path& out);

}  // namespace techdiff
