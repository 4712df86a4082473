#pragma once

#include "techdiff/geo.hpp"
#include "techdiff/spectral.hpp"
#include "techdiff/types.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace techdiff {

struct TechSpec {
    std::string name;
    int intro_year = 2010;
    double seed_fraction = 0.1;
    double forcing_scale = 1.0;
};

std::vector<TechSpec> default_technologies();

struct ShockSpec {
    bool enabled = true;
    int year = 2020;
    // Forcing multiplier (1 + boost) for treated firms from `year` on, times (1 + impulse) in `year` itself.
    double forcing_boost = 0.8;
    double impulse = 2.0;
    // Total weight growth spread geometrically over (consolidation_from, consolidation_to].
    double consolidation = 1.8;
    int consolidation_from = 2019;
    int consolidation_to = 2023;
    // Share of clusters whose firms form the shock seed set. With `balance` set, the split is the one
    // whose treated and control groups had the most parallel adoption paths before `year`; otherwise
    // it is drawn at random.
    double seed_cluster_share = 0.5;
    bool balance = true;
    // Treated firms lie within d*(kappa, treated_epsilon) of the seed set.
    double treated_epsilon = 0.05;
};

struct SimConfig {
    std::size_t n_firms = 500;
    int first_year = 2010;
    int last_year = 2023;
    std::vector<TechSpec> technologies = default_technologies();

    double nu = 0.002;
    double kappa = 0.0435;
    double network_coupling = 1e-6;
    double dt = 0.05;
    double forcing = 0.5;
    ShockSpec shock;

    double target_density = 0.059;
    double target_degree = 29.2;
    MultiplierScheme multiplier;
    std::uint64_t seed = 42;

    std::size_t n_clusters = 8;
    double cluster_sigma_km = 150.0;
    double lat_min = 31.0;
    double lat_max = 44.0;
    double lon_min = -120.0;
    double lon_max = -74.0;
    double spatial_epsilon = 0.01;  // spatial kernel cutoff at d*(kappa, spatial_epsilon)
    double edge_persistence = 0.85;
    double weight_mean = 158.0;
    double weight_cv = 0.7;
    double degree_shape = 9.0;
    std::size_t min_degree = 12;
    int churn_candidates = 16;
    double stratum_km = 5.0;
    int max_retries = 50;

    // kappa = sqrt(absorption / nu); reported, not used by the dynamics.
    double absorption() const { return kappa * kappa * nu; }
    int n_years() const { return last_year - first_year + 1; }
    void validate() const;
};

struct GenerationLog {
    std::vector<int> years;
    std::vector<std::vector<double>> lambda2;  // [tech][year]
    std::vector<double> weight_rescale;        // per year, 1 when no correction was needed
    std::vector<double> density;
    std::vector<double> mean_degree;
    std::vector<double> mean_weight;
    int network_retries = 0;
    double shock_imbalance = 0.0;  // pre-shock gap variance of the chosen treated split
};

struct SyntheticDataset {
    SimConfig config;
    FirmTable firms;
    std::vector<std::size_t> cluster;
    AdoptionPanel panel;
    std::vector<YearNetwork> networks;
    std::vector<std::uint8_t> shock_seed;
    std::vector<std::uint8_t> treated;
    GenerationLog log;
};

// Exponential-kernel Laplacian, weights exp(-kappa d) for pairs within `cutoff_km`.
LaplacianMatrix spatial_laplacian(const FirmTable& firms, double kappa, double cutoff_km);
LaplacianMatrix spatial_laplacian(const DistanceMatrix& dm, double kappa, double cutoff_km,
                                  bool require_connected = true);

void check_stability(const LaplacianMatrix& L_spatial, const LaplacianMatrix& L_network, double coupling,
                     double dt);

Eigen::VectorXd step_dual(const Eigen::VectorXd& u, const LaplacianMatrix& L_spatial,
                          const LaplacianMatrix& L_network, double coupling, const Eigen::VectorXd& f, double dt);

SyntheticDataset generate(const SimConfig& config);

}  // namespace techdiff
