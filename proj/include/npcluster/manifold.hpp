#pragma once

// UMAP-style manifold projection: k-nearest-neighbour graph, smooth-kNN
// calibration, fuzzy simplicial set, output-kernel fit, initialisation and
// cross-entropy SGD layout.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "npcluster/core_data.hpp"

namespace npcluster::manifold {

enum class InitMethod { spectral, random };

struct UmapConfig {
    std::size_t n_neighbors = 100;
    double min_dist = 0.5;
    double spread = 1.0;
    std::size_t dim = 2;
    // Unset means 500 below 10,000 samples and 200 otherwise.
    std::optional<std::size_t> n_epochs;
    std::size_t negative_sample_rate = 5;
    double initial_learning_rate = 1.0;
    InitMethod init = InitMethod::spectral;
    std::uint64_t seed = 0;
    // Single worker with a fixed update order: bitwise reproducible.
    bool deterministic = false;
    // 0 selects default_thread_count().
    std::size_t threads = 0;
    // Exact search up to this many samples, NN-descent above.
    std::size_t exact_knn_limit = 4096;

    std::size_t epochs_for(std::size_t n) const { return n_epochs.value_or(n < 10000 ? 500 : 200); }
    void validate() const;
};

struct KnnGraph {
    std::size_t n = 0;
    std::size_t k = 0;
    // Row-major n x k; each row ascending by (distance, index), no self.
    std::vector<std::uint32_t> indices;
    std::vector<double> distances;

    std::span<const std::uint32_t> neighbors(std::size_t i) const { return {indices.data() + i * k, k}; }
    std::span<const double> neighbor_distances(std::size_t i) const { return {distances.data() + i * k, k}; }
};

struct KnnOptions {
    std::size_t exact_limit = 4096;
    std::size_t threads = 0;
    std::size_t max_descent_iterations = 20;
    double descent_delta = 0.001;
};

// Exact search when n <= exact_limit, NN-descent otherwise. Requires k < n.
KnnGraph build_knn(const FeatureMatrix& features, std::size_t k, std::uint64_t seed,
                   const KnnOptions& options = {});
KnnGraph exact_knn(const FeatureMatrix& features, std::size_t k, std::size_t threads = 0);
KnnGraph nn_descent(const FeatureMatrix& features, std::size_t k, std::uint64_t seed,
                    const KnnOptions& options = {});

struct SmoothKnnCalibration {
    std::vector<double> rho;
    std::vector<double> sigma;
    // True where sigma sits on the clamp because no bandwidth reaches the target.
    std::vector<bool> clamped;
};

inline constexpr double kCalibrationTolerance = 1e-5;
inline constexpr int kCalibrationMaxIterations = 64;
inline constexpr double kMinSigmaScale = 1e-3;

// Per-node rho (nearest distance) and sigma solving
// sum_j exp(-max(0, d_ij - rho) / sigma) = log2(k) by bisection.
SmoothKnnCalibration calibrate_smooth_knn(const KnnGraph& graph);

// Single-node form of the calibration, exposed for testing.
struct NodeCalibration {
    double rho;
    double sigma;
    bool clamped;
};
NodeCalibration calibrate_node(std::span<const double> distances, double mean_distance_fallback);

// Left side of the calibration equation for one node.
double membership_mass(std::span<const double> distances, double rho, double sigma);

struct FuzzyEdge {
    std::uint32_t i;
    std::uint32_t j;
    double weight;
};

struct FuzzyGraph {
    std::size_t n = 0;
    // Undirected edges with i < j, sorted by (i, j); weights in (0, 1].
    std::vector<FuzzyEdge> edges;
    std::vector<double> rho;
    std::vector<double> sigma;
};

// Probabilistic t-conorm a + b - a*b.
constexpr double fuzzy_union(double a, double b) noexcept { return a + b - a * b; }

FuzzyGraph fuzzy_simplicial_set(const KnnGraph& graph, const SmoothKnnCalibration& calibration);

// "i j weight" per line.
void write_fuzzy_graph_text(const FuzzyGraph& graph, const std::filesystem::path& path);

struct CurveParams {
    double a;
    double b;
};

// Low-dimensional similarity 1 / (1 + a * t^(2b)).
double curve_kernel(const CurveParams& params, double t);

struct CurveFit {
    CurveParams params;
    double rms_residual;
    int iterations;
};

// Levenberg-Marquardt fit of the kernel to 1 on [0, min_dist] and
// exp(-(t - min_dist) / spread) beyond, sampled at 300 points on [0, 3*spread].
CurveFit fit_curve(double min_dist, double spread);
CurveParams fit_curve_params(double min_dist, double spread);

// Spectral layout from the symmetric normalised Laplacian, scaled to max-abs
// 10 with +-1e-4 uniform jitter. Disconnected graphs get one spectral layout
// per component on a unit grid; components too small for a spectral layout,
// or whose eigensolve fails, are placed randomly (with a logged warning).
EmbeddingMatrix initialize_embedding(const FuzzyGraph& graph, std::size_t dim, InitMethod method,
                                     std::uint64_t seed);

EmbeddingMatrix optimize_embedding(const FuzzyGraph& graph, const EmbeddingMatrix& init,
                                   const CurveParams& curve, const UmapConfig& config);

// Full projection. Requires n > n_neighbors.
EmbeddingMatrix embed(const FeatureMatrix& features, const UmapConfig& config);

// Connected component id per node (ids in order of first node).
std::vector<std::uint32_t> connected_components(const FuzzyGraph& graph, std::size_t* count = nullptr);

}  // namespace npcluster::manifold
