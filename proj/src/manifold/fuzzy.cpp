#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "npcluster/errors.hpp"
#include "npcluster/manifold.hpp"

namespace npcluster::manifold {

double membership_mass(std::span<const double> distances, double rho, double sigma) {
    double mass = 0.0;
    for (double d : distances) {
        mass += std::exp(-std::max(0.0, d - rho) / sigma);
    }
    return mass;
}

NodeCalibration calibrate_node(std::span<const double> distances, double mean_distance_fallback) {
    if (distances.size() < 2) {
        throw PreconditionError("smooth-kNN calibration needs at least 2 neighbours per node");
    }
    const double rho = distances.front();
    const double target = std::log2(static_cast<double>(distances.size()));

    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double mid = 1.0;
    for (int iter = 0; iter < kCalibrationMaxIterations; ++iter) {
        const double mass = membership_mass(distances, rho, mid);
        if (std::abs(mass - target) < kCalibrationTolerance) break;
        if (mass > target) {
            hi = mid;
            mid = 0.5 * (lo + hi);
        } else {
            lo = mid;
            mid = std::isinf(hi) ? mid * 2.0 : 0.5 * (lo + hi);
        }
    }

    const double mean = std::accumulate(distances.begin(), distances.end(), 0.0) /
                        static_cast<double>(distances.size());
    double floor = kMinSigmaScale * (mean > 0.0 ? mean : mean_distance_fallback);
    if (!(floor > 0.0)) floor = kMinSigmaScale;
    if (mid < floor) return {rho, floor, true};
    return {rho, mid, false};
}

SmoothKnnCalibration calibrate_smooth_knn(const KnnGraph& graph) {
    const double global_mean =
        graph.distances.empty()
            ? 0.0
            : std::accumulate(graph.distances.begin(), graph.distances.end(), 0.0) /
                  static_cast<double>(graph.distances.size());
    SmoothKnnCalibration out;
    out.rho.resize(graph.n);
    out.sigma.resize(graph.n);
    out.clamped.resize(graph.n);
    for (std::size_t i = 0; i < graph.n; ++i) {
        const auto node = calibrate_node(graph.neighbor_distances(i), global_mean);
        out.rho[i] = node.rho;
        out.sigma[i] = node.sigma;
        out.clamped[i] = node.clamped;
    }
    return out;
}

FuzzyGraph fuzzy_simplicial_set(const KnnGraph& graph, const SmoothKnnCalibration& calibration) {
    struct Directed {
        std::uint32_t lo, hi;
        double weight;
    };
    std::vector<Directed> directed;
    directed.reserve(graph.n * graph.k);
    for (std::size_t i = 0; i < graph.n; ++i) {
        const auto nbrs = graph.neighbors(i);
        const auto dists = graph.neighbor_distances(i);
        for (std::size_t r = 0; r < graph.k; ++r) {
            const double w = std::exp(-std::max(0.0, dists[r] - calibration.rho[i]) / calibration.sigma[i]);
            const auto a = static_cast<std::uint32_t>(i);
            const auto b = nbrs[r];
            directed.push_back({std::min(a, b), std::max(a, b), w});
        }
    }
    std::sort(directed.begin(), directed.end(), [](const Directed& x, const Directed& y) {
        return x.lo < y.lo || (x.lo == y.lo && x.hi < y.hi);
    });

    FuzzyGraph out;
    out.n = graph.n;
    out.rho = calibration.rho;
    out.sigma = calibration.sigma;
    for (std::size_t t = 0; t < directed.size();) {
        double w = directed[t].weight;
        std::size_t next = t + 1;
        if (next < directed.size() && directed[next].lo == directed[t].lo && directed[next].hi == directed[t].hi) {
            w = fuzzy_union(w, directed[next].weight);
            ++next;
        }
        if (w > 0.0) out.edges.push_back({directed[t].lo, directed[t].hi, std::min(w, 1.0)});
        t = next;
    }
    return out;
}

void write_fuzzy_graph_text(const FuzzyGraph& graph, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out.precision(17);
    for (const auto& e : graph.edges) {
        out << e.i << ' ' << e.j << ' ' << e.weight << '\n';
    }
}

std::vector<std::uint32_t> connected_components(const FuzzyGraph& graph, std::size_t* count) {
    std::vector<std::uint32_t> parent(graph.n);
    std::iota(parent.begin(), parent.end(), 0u);
    const auto find = [&](std::uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (const auto& e : graph.edges) {
        const auto a = find(e.i), b = find(e.j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    constexpr auto kUnset = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> root_id(graph.n, kUnset);
    std::vector<std::uint32_t> component(graph.n);
    std::uint32_t next = 0;
    for (std::uint32_t i = 0; i < graph.n; ++i) {
        const auto r = find(i);
        if (root_id[r] == kUnset) root_id[r] = next++;
        component[i] = root_id[r];
    }
    if (count) *count = next;
    return component;
}

}  // namespace npcluster::manifold
