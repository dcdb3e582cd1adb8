#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "npcluster/errors.hpp"
#include "npcluster/logging.hpp"
#include "npcluster/manifold.hpp"
#include "npcluster/parallel.hpp"
#include "npcluster/random.hpp"

namespace npcluster::manifold {

void UmapConfig::validate() const {
    if (n_neighbors < 2) throw ConfigError("n_neighbors must be at least 2");
    if (min_dist < 0.0) throw ConfigError("min_dist must be non-negative");
    if (!(spread > 0.0)) throw ConfigError("spread must be positive");
    if (min_dist > spread) throw ConfigError("min_dist must not exceed spread");
    if (dim < 1) throw ConfigError("embedding dimension must be at least 1");
    if (!(initial_learning_rate > 0.0)) throw ConfigError("initial learning rate must be positive");
}

namespace {

constexpr double kGradientClip = 4.0;

inline double clip(double v) { return std::clamp(v, -kGradientClip, kGradientClip); }

// Position access. The concurrent variant uses relaxed atomic references so
// unsynchronised workers never tear a coordinate.
template <bool Concurrent>
struct Coords {
    double* data;
    double load(std::size_t i) const {
        if constexpr (Concurrent) return std::atomic_ref<double>(data[i]).load(std::memory_order_relaxed);
        else return data[i];
    }
    void add(std::size_t i, double delta) const {
        if constexpr (Concurrent) {
            std::atomic_ref<double> ref(data[i]);
            ref.store(ref.load(std::memory_order_relaxed) + delta, std::memory_order_relaxed);
        } else {
            data[i] += delta;
        }
    }
};

struct Schedule {
    std::vector<std::uint32_t> head;
    std::vector<std::uint32_t> tail;
    std::vector<double> epochs_per_sample;
    std::vector<double> epochs_per_negative;
    std::vector<double> next_sample;
    std::vector<double> next_negative;
};

Schedule make_schedule(const FuzzyGraph& graph, std::size_t negative_rate) {
    Schedule s;
    double max_w = 0.0;
    for (const auto& e : graph.edges) max_w = std::max(max_w, e.weight);
    for (const auto& e : graph.edges) {
        const double eps = max_w / e.weight;
        for (int dir = 0; dir < 2; ++dir) {
            s.head.push_back(dir == 0 ? e.i : e.j);
            s.tail.push_back(dir == 0 ? e.j : e.i);
            s.epochs_per_sample.push_back(eps);
            s.epochs_per_negative.push_back(eps / static_cast<double>(negative_rate));
        }
    }
    s.next_sample = s.epochs_per_sample;
    s.next_negative = s.epochs_per_negative;
    return s;
}

template <bool Concurrent>
void run_edges(Schedule& s, Coords<Concurrent> y, std::size_t dim, std::size_t n, const CurveParams& curve,
               double alpha, std::size_t epoch, std::uint64_t key, std::size_t begin, std::size_t end) {
    const double a = curve.a, b = curve.b;
    const auto epoch_d = static_cast<double>(epoch);
    const std::size_t edge_count = s.head.size();
    std::vector<double> cur(dim), other(dim);
    for (std::size_t e = begin; e < end; ++e) {
        if (s.next_sample[e] > epoch_d) continue;
        const std::size_t h = s.head[e], t = s.tail[e];

        double d2 = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            cur[k] = y.load(h * dim + k);
            other[k] = y.load(t * dim + k);
            d2 += (cur[k] - other[k]) * (cur[k] - other[k]);
        }
        if (d2 > 0.0) {
            const double coeff = -2.0 * a * b * std::pow(d2, b - 1.0) / (a * std::pow(d2, b) + 1.0);
            for (std::size_t k = 0; k < dim; ++k) {
                const double g = clip(coeff * (cur[k] - other[k])) * alpha;
                y.add(h * dim + k, g);
                y.add(t * dim + k, -g);
                cur[k] += g;
            }
        }
        s.next_sample[e] += s.epochs_per_sample[e];

        const auto n_neg = static_cast<std::size_t>((epoch_d - s.next_negative[e]) / s.epochs_per_negative[e]);
        CounterRng rng(derive_seed(key, epoch * edge_count + e));
        for (std::size_t q = 0; q < n_neg; ++q) {
            const auto r = static_cast<std::size_t>(rng.below(n));
            if (r == h) continue;
            double nd2 = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                other[k] = y.load(r * dim + k);
                nd2 += (cur[k] - other[k]) * (cur[k] - other[k]);
            }
            const double coeff = nd2 > 0.0 ? 2.0 * b / ((0.001 + nd2) * (a * std::pow(nd2, b) + 1.0)) : 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                const double g = (coeff > 0.0 ? clip(coeff * (cur[k] - other[k])) : kGradientClip) * alpha;
                y.add(h * dim + k, g);
                cur[k] += g;
            }
        }
        s.next_negative[e] += static_cast<double>(n_neg) * s.epochs_per_negative[e];
    }
}

}  // namespace

EmbeddingMatrix optimize_embedding(const FuzzyGraph& graph, const EmbeddingMatrix& init, const CurveParams& curve,
                                   const UmapConfig& config) {
    if (init.rows() != graph.n) {
        throw PreconditionError("initial embedding has " + std::to_string(init.rows()) + " rows, graph has " +
                                std::to_string(graph.n) + " nodes");
    }
    if (config.negative_sample_rate == 0) throw ConfigError("negative_sample_rate must be positive");
    const std::size_t n = graph.n;
    const std::size_t dim = init.cols();
    const std::size_t n_epochs = config.epochs_for(n);
    std::vector<double> coords(init.values().begin(), init.values().end());
    if (n_epochs == 0 || graph.edges.empty()) return EmbeddingMatrix(n, dim, std::move(coords));

    Schedule schedule = make_schedule(graph, config.negative_sample_rate);
    const std::uint64_t key = derive_seed(config.seed, 0x5fd);
    const std::size_t threads =
        config.deterministic ? 1 : (config.threads == 0 ? default_thread_count() : config.threads);

    for (std::size_t epoch = 0; epoch < n_epochs; ++epoch) {
        const double alpha =
            config.initial_learning_rate * (1.0 - static_cast<double>(epoch) / static_cast<double>(n_epochs));
        if (threads <= 1) {
            run_edges(schedule, Coords<false>{coords.data()}, dim, n, curve, alpha, epoch, key, 0,
                      schedule.head.size());
        } else {
            parallel_for(schedule.head.size(), threads, [&](std::size_t begin, std::size_t end) {
                run_edges(schedule, Coords<true>{coords.data()}, dim, n, curve, alpha, epoch, key, begin, end);
            });
        }
    }
    return EmbeddingMatrix(n, dim, std::move(coords));
}

EmbeddingMatrix embed(const FeatureMatrix& features, const UmapConfig& config) {
    config.validate();
    const std::size_t n = features.rows();
    if (n <= config.n_neighbors) {
        throw PreconditionError("embedding needs more samples (n=" + std::to_string(n) +
                                ") than neighbours (n_neighbors=" + std::to_string(config.n_neighbors) + ")");
    }
    KnnOptions knn_options;
    knn_options.exact_limit = config.exact_knn_limit;
    knn_options.threads = config.deterministic ? 1 : config.threads;
    const auto knn = build_knn(features, config.n_neighbors, derive_seed(config.seed, 1), knn_options);
    const auto calibration = calibrate_smooth_knn(knn);
    const auto fuzzy = fuzzy_simplicial_set(knn, calibration);
    const auto curve = fit_curve_params(config.min_dist, config.spread);
    const auto init = initialize_embedding(fuzzy, config.dim, config.init, derive_seed(config.seed, 2));
    return optimize_embedding(fuzzy, init, curve, config);
}

}  // namespace npcluster::manifold
