#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "npcluster/core_data.hpp"

namespace npcluster::baselines {

struct KmeansResult {
    LabelVector labels;
    std::size_t k = 0;
    std::size_t dim = 0;
    // Row-major k x dim.
    std::vector<double> centers;
    double inertia = 0.0;
    std::size_t iterations = 0;
    // Inertia after every Lloyd iteration of the returned run.
    std::vector<double> inertia_trace;
    std::size_t best_init = 0;
    std::string seeding = "k-means++";

    std::span<const double> center(std::size_t j) const { return {centers.data() + j * dim, dim}; }
};

inline constexpr std::size_t kDefaultKmeansIterations = 300;

// Lloyd's algorithm with k-means++ seeding; the lowest-inertia of n_init
// runs is returned (earliest run on ties). Init i draws from seed stream i.
KmeansResult kmeans_fit(const EmbeddingMatrix& y, std::size_t k, std::size_t n_init,
                        std::size_t max_iter = kDefaultKmeansIterations, std::uint64_t seed = 0);

// Sum of squared distances from each point to its labelled center.
double kmeans_inertia(const EmbeddingMatrix& y, std::span<const Label> labels, std::span<const double> centers);

}  // namespace npcluster::baselines
