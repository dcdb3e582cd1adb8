#include "npcluster/kmeans.hpp"

#include <limits>
#include <string>

#include "npcluster/errors.hpp"
#include "npcluster/random.hpp"
#include "npcluster/simd/kernels.hpp"

namespace npcluster::baselines {

namespace {

std::vector<double> seed_plus_plus(const EmbeddingMatrix& y, std::size_t k, CounterRng& rng) {
    const std::size_t n = y.rows(), dim = y.cols();
    const auto& kern = simd::kernels();
    std::vector<double> centers;
    centers.reserve(k * dim);
    std::vector<bool> chosen(n, false);
    auto take = [&](std::size_t i) {
        chosen[i] = true;
        const auto r = y.row(i);
        centers.insert(centers.end(), r.begin(), r.end());
    };
    take(rng.below(n));
    std::vector<double> nearest(n);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = kern.squared_l2_f64(y.row(i).data(), centers.data(), dim);

    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double d : nearest) total += d;
        std::size_t pick = n;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            for (std::size_t i = 0; i < n; ++i) {
                if (nearest[i] <= 0.0) continue;
                pick = i;
                target -= nearest[i];
                if (target < 0.0) break;
            }
        } else {
            // Every point coincides with a center: take an unused index.
            std::size_t remaining = 0;
            for (bool b : chosen) remaining += !b;
            std::size_t skip = rng.below(remaining);
            for (std::size_t i = 0; i < n; ++i) {
                if (chosen[i]) continue;
                if (skip-- == 0) {
                    pick = i;
                    break;
                }
            }
        }
        take(pick);
        const double* newest = centers.data() + c * dim;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], kern.squared_l2_f64(y.row(i).data(), newest, dim));
        }
    }
    return centers;
}

KmeansResult lloyd(const EmbeddingMatrix& y, std::size_t k, std::size_t max_iter, CounterRng& rng) {
    const std::size_t n = y.rows(), dim = y.cols();
    const auto& kern = simd::kernels();
    KmeansResult res;
    res.k = k;
    res.dim = dim;
    res.centers = seed_plus_plus(y, k, rng);
    res.labels.assign(n, 0);
    std::vector<double> dist(n);
    std::vector<std::size_t> sizes(k);

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            Label arg = 0;
            for (std::size_t j = 0; j < k; ++j) {
                const double d = kern.squared_l2_f64(y.row(i).data(), res.centers.data() + j * dim, dim);
                if (d < best) {
                    best = d;
                    arg = static_cast<Label>(j);
                }
            }
            changed |= (iter == 0 || arg != res.labels[i]);
            res.labels[i] = arg;
            dist[i] = best;
        }
        if (!changed) break;
        res.iterations = iter + 1;

        std::fill(sizes.begin(), sizes.end(), 0);
        for (Label l : res.labels) ++sizes[l];
        for (std::size_t j = 0; j < k; ++j) {
            if (sizes[j] != 0) continue;
            // Steal the point farthest from its center among non-singleton clusters.
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (sizes[res.labels[i]] > 1 && (far == n || dist[i] > dist[far])) far = i;
            }
            if (far == n) break;
            --sizes[res.labels[far]];
            res.labels[far] = static_cast<Label>(j);
            sizes[j] = 1;
            dist[far] = 0.0;
        }

        std::fill(res.centers.begin(), res.centers.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = y.row(i);
            double* c = res.centers.data() + res.labels[i] * dim;
            for (std::size_t t = 0; t < dim; ++t) c[t] += r[t];
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (sizes[j] == 0) continue;
            for (std::size_t t = 0; t < dim; ++t) res.centers[j * dim + t] /= static_cast<double>(sizes[j]);
        }
        res.inertia_trace.push_back(kmeans_inertia(y, res.labels, res.centers));
    }
    res.inertia = kmeans_inertia(y, res.labels, res.centers);
    return res;
}

}  // namespace

double kmeans_inertia(const EmbeddingMatrix& y, std::span<const Label> labels, std::span<const double> centers) {
    const auto& kern = simd::kernels();
    const std::size_t dim = y.cols();
    double total = 0.0;
    for (std::size_t i = 0; i < y.rows(); ++i) {
        total += kern.squared_l2_f64(y.row(i).data(), centers.data() + labels[i] * dim, dim);
    }
    return total;
}

KmeansResult kmeans_fit(const EmbeddingMatrix& y, std::size_t k, std::size_t n_init, std::size_t max_iter,
                        std::uint64_t seed) {
    if (k == 0) throw PreconditionError("k must be at least 1");
    if (k > y.rows()) {
        throw PreconditionError("k=" + std::to_string(k) + " exceeds the number of points n=" +
                                std::to_string(y.rows()));
    }
    if (n_init == 0) throw PreconditionError("n_init must be at least 1");
    KmeansResult best;
    for (std::size_t init = 0; init < n_init; ++init) {
        CounterRng rng(derive_seed(seed, init));
        auto run = lloyd(y, k, max_iter, rng);
        run.best_init = init;
        if (init == 0 || run.inertia < best.inertia) best = std::move(run);
    }
    return best;
}

}  // namespace npcluster::baselines
