#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "npcluster/core_data.hpp"
#include "npcluster/random.hpp"

namespace synth {

struct Blobs {
    std::vector<double> values;  // row-major n x dim
    npcluster::LabelVector labels;
    std::size_t n = 0, dim = 0;

    npcluster::EmbeddingMatrix embedding() const { return {n, dim, values}; }
    npcluster::FeatureMatrix features() const {
        return {n, dim, std::vector<float>(values.begin(), values.end())};
    }
};

// Isotropic Gaussian clusters of the given sizes around explicit centres.
inline Blobs gaussian_blobs(const std::vector<std::vector<double>>& centers, const std::vector<std::size_t>& sizes,
                            double sigma, std::uint64_t seed) {
    Blobs b;
    b.dim = centers.front().size();
    npcluster::CounterRng rng(npcluster::derive_seed(seed, 0xb10b));
    for (std::size_t c = 0; c < centers.size(); ++c) {
        for (std::size_t i = 0; i < sizes[c]; ++i) {
            for (std::size_t j = 0; j < b.dim; ++j) b.values.push_back(centers[c][j] + sigma * rng.normal());
            b.labels.push_back(static_cast<npcluster::Label>(c));
        }
    }
    b.n = b.labels.size();
    return b;
}

// Three unit-variance clusters in the plane, pairwise 12 apart.
inline Blobs three_blobs(std::size_t per_cluster, std::uint64_t seed) {
    const double h = 12.0 * std::sqrt(3.0) / 2.0;
    return gaussian_blobs({{0.0, 0.0}, {12.0, 0.0}, {6.0, h}}, {per_cluster, per_cluster, per_cluster}, 1.0, seed);
}

// Two unit-variance clusters in `dim` dimensions whose centres are `gap` apart.
inline Blobs two_blobs(std::size_t per_cluster, std::size_t dim, double gap, std::uint64_t seed) {
    std::vector<double> a(dim, 0.0), b(dim, 0.0);
    b[0] = gap;
    return gaussian_blobs({a, b}, {per_cluster, per_cluster}, 1.0, seed);
}

}  // namespace synth
