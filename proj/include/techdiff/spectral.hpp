#pragma once

#include "techdiff/types.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <vector>

namespace techdiff {

struct LaplacianMatrix {
    Eigen::SparseMatrix<double> L;

    std::size_t size() const { return static_cast<std::size_t>(L.rows()); }
    Eigen::MatrixXd dense() const { return Eigen::MatrixXd(L); }
    // Largest absolute row sum; bounds the spectral radius.
    double max_abs_row_sum() const;
};

struct LaplacianSpectrum {
    Eigen::VectorXd eigenvalues;   // ascending
    Eigen::MatrixXd eigenvectors;  // columns, empty unless requested
    std::size_t zero_count = 0;    // eigenvalues below kZeroEigenvalue

    bool connected() const { return zero_count == 1; }
    double lambda2() const { return eigenvalues.size() > 1 ? eigenvalues(1) : 0.0; }
};

inline constexpr double kZeroEigenvalue = 1e-8;
inline constexpr std::size_t kDefaultDenseCap = 2000;

std::size_t component_count(std::size_t n, const std::vector<Edge>& edges);

// Validates the YearNetwork invariants (pairs unique, i < j, positive weights, connected).
void validate(const YearNetwork& net);

// Laplacian of a checked, connected network; ConnectivityError otherwise.
LaplacianMatrix build_laplacian(const YearNetwork& net);

// Laplacian of an arbitrary nonnegative edge list, no connectivity requirement.
LaplacianMatrix laplacian_from_edges(std::size_t n, const std::vector<Edge>& edges);

YearNetwork tech_weighted_network(const YearNetwork& net, const AdoptionPanel& panel, TechId tech, int year,
                                  const MultiplierScheme& m = {});

YearNetwork scale_weights(const YearNetwork& net, double factor);

struct LanczosResult {
    double lambda2 = 0.0;
    double residual = 0.0;       // |beta_k * last component of the Ritz vector|
    double error_bound = 0.0;
    int iterations = 0;
};

// Second-smallest Laplacian eigenvalue by Lanczos with full re-orthogonalization, every Krylov
// vector projected off the constant vector. max_iter <= 0 means n - 1.
LanczosResult lambda2_lanczos(const LaplacianMatrix& L, int max_iter = 0, double tol = 1e-10,
                              std::uint64_t seed = 0x5eed);

// Eigenvalues (ascending) of the symmetric tridiagonal matrix with diagonal `a` and off-diagonal
// `b`, plus the last component of each unit eigenvector. Implicit QR with Wilkinson shifts.
struct TridiagonalEigen {
    std::vector<double> values;
    std::vector<double> last_components;
};
TridiagonalEigen tridiagonal_eigen(std::vector<double> a, std::vector<double> b);

LaplacianSpectrum dense_spectrum(const LaplacianMatrix& L, bool with_vectors = false,
                                 std::size_t dense_cap = kDefaultDenseCap);

double mixing_time(double lambda2, double epsilon);

// Exact solution of du/dt = -L u from u0 via the eigen-decomposition.
Eigen::VectorXd diffuse_modes(const LaplacianSpectrum& spectrum, const Eigen::VectorXd& u0, double t);
Eigen::VectorXd diffuse_modes(const LaplacianMatrix& L, const Eigen::VectorXd& u0, double t,
                              std::size_t dense_cap = kDefaultDenseCap);

struct NetworkStats {
    double density = 0.0;
    double average_degree = 0.0;
    double clustering = 0.0;           // mean local clustering, degree < 2 counts as 0
    double average_path_length = 0.0;  // over connected ordered pairs
    std::vector<std::size_t> degree;
    std::vector<double> weighted_degree;
    std::vector<double> betweenness;   // normalized by (n-1)(n-2)/2
};

NetworkStats network_stats(const YearNetwork& net);

}  // namespace techdiff
