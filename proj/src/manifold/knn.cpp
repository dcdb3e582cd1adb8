#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "npcluster/errors.hpp"
#include "npcluster/manifold.hpp"
#include "npcluster/parallel.hpp"
#include "npcluster/random.hpp"
#include "npcluster/simd/kernels.hpp"

namespace npcluster::manifold {

namespace {

void check_k(std::size_t n, std::size_t k) {
    if (k == 0) {
        throw PreconditionError("neighbour count k must be positive");
    }
    if (k >= n) {
        throw PreconditionError("neighbour count k=" + std::to_string(k) +
                                " must be smaller than the sample count n=" + std::to_string(n));
    }
}

std::size_t resolve_threads(std::size_t threads) { return threads == 0 ? default_thread_count() : threads; }

// Bounded max-heap of (distance, index) candidates for one node.
class NeighborHeap {
public:
    struct Entry {
        float dist;
        std::uint32_t index;
        bool fresh;
    };

    explicit NeighborHeap(std::size_t capacity) : capacity_(capacity) { entries_.reserve(capacity); }

    bool contains(std::uint32_t index) const {
        return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.index == index; });
    }

    // Returns true when the candidate entered the heap.
    bool push(float dist, std::uint32_t index) {
        if (entries_.size() == capacity_ && !worse(entries_.front(), dist, index)) return false;
        if (contains(index)) return false;
        if (entries_.size() < capacity_) {
            entries_.push_back({dist, index, true});
            std::push_heap(entries_.begin(), entries_.end(), less);
        } else {
            std::pop_heap(entries_.begin(), entries_.end(), less);
            entries_.back() = {dist, index, true};
            std::push_heap(entries_.begin(), entries_.end(), less);
        }
        return true;
    }

    std::vector<Entry>& entries() { return entries_; }

private:
    static bool less(const Entry& a, const Entry& b) {
        return a.dist < b.dist || (a.dist == b.dist && a.index < b.index);
    }
    static bool worse(const Entry& top, float dist, std::uint32_t index) {
        return dist < top.dist || (dist == top.dist && index < top.index);
    }

    std::size_t capacity_;
    std::vector<Entry> entries_;
};

}  // namespace

KnnGraph exact_knn(const FeatureMatrix& features, std::size_t k, std::size_t threads) {
    const std::size_t n = features.rows();
    check_k(n, k);
    KnnGraph graph{n, k, std::vector<std::uint32_t>(n * k), std::vector<double>(n * k)};
    const auto& kern = simd::kernels();
    const std::size_t d = features.cols();
    const float* base = features.values().data();
    parallel_for(n, resolve_threads(threads), [&](std::size_t begin, std::size_t end) {
        std::vector<std::pair<float, std::uint32_t>> candidates(n - 1);
        for (std::size_t i = begin; i < end; ++i) {
            std::size_t c = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                candidates[c++] = {kern.squared_l2_f32(base + i * d, base + j * d, d),
                                   static_cast<std::uint32_t>(j)};
            }
            std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                              candidates.end());
            for (std::size_t r = 0; r < k; ++r) {
                graph.indices[i * k + r] = candidates[r].second;
                graph.distances[i * k + r] = std::sqrt(static_cast<double>(candidates[r].first));
            }
        }
    });
    return graph;
}

KnnGraph nn_descent(const FeatureMatrix& features, std::size_t k, std::uint64_t seed, const KnnOptions& options) {
    const std::size_t n = features.rows();
    check_k(n, k);
    const auto& kern = simd::kernels();
    const std::size_t d = features.cols();
    const float* base = features.values().data();
    const auto dist = [&](std::size_t a, std::size_t b) { return kern.squared_l2_f32(base + a * d, base + b * d, d); };

    std::vector<NeighborHeap> heaps(n, NeighborHeap(k));
    CounterRng rng(derive_seed(seed, 0x6b6e6e));
    for (std::size_t i = 0; i < n; ++i) {
        while (heaps[i].entries().size() < k) {
            auto j = static_cast<std::uint32_t>(rng.below(n));
            if (j == i) continue;
            heaps[i].push(dist(i, j), j);
        }
    }

    std::vector<std::vector<std::uint32_t>> fresh(n), stale(n), fresh_rev(n), stale_rev(n);
    for (std::size_t iter = 0; iter < options.max_descent_iterations; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            fresh[i].clear();
            stale[i].clear();
            fresh_rev[i].clear();
            stale_rev[i].clear();
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& e : heaps[i].entries()) {
                if (e.fresh) {
                    fresh[i].push_back(e.index);
                    fresh_rev[e.index].push_back(static_cast<std::uint32_t>(i));
                    e.fresh = false;
                } else {
                    stale[i].push_back(e.index);
                    stale_rev[e.index].push_back(static_cast<std::uint32_t>(i));
                }
            }
        }
        // Merge a bounded random sample of reverse neighbours into each list.
        const auto merge = [&](std::vector<std::uint32_t>& into, std::vector<std::uint32_t>& rev) {
            for (std::size_t s = 0; s < rev.size() && s < k; ++s) {
                const std::size_t pick = s + rng.below(rev.size() - s);
                std::swap(rev[s], rev[pick]);
                if (std::find(into.begin(), into.end(), rev[s]) == into.end()) into.push_back(rev[s]);
            }
        };
        for (std::size_t i = 0; i < n; ++i) {
            merge(fresh[i], fresh_rev[i]);
            merge(stale[i], stale_rev[i]);
        }

        std::size_t updates = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& nf = fresh[i];
            const auto& no = stale[i];
            for (std::size_t a = 0; a < nf.size(); ++a) {
                for (std::size_t b = a + 1; b < nf.size(); ++b) {
                    const auto u = nf[a], v = nf[b];
                    if (u == v) continue;
                    const float duv = dist(u, v);
                    updates += heaps[u].push(duv, v);
                    updates += heaps[v].push(duv, u);
                }
                for (const auto v : no) {
                    const auto u = nf[a];
                    if (u == v) continue;
                    const float duv = dist(u, v);
                    updates += heaps[u].push(duv, v);
                    updates += heaps[v].push(duv, u);
                }
            }
        }
        if (static_cast<double>(updates) <= options.descent_delta * static_cast<double>(n * k)) break;
    }

    KnnGraph graph{n, k, std::vector<std::uint32_t>(n * k), std::vector<double>(n * k)};
    for (std::size_t i = 0; i < n; ++i) {
        auto& entries = heaps[i].entries();
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
            return a.dist < b.dist || (a.dist == b.dist && a.index < b.index);
        });
        for (std::size_t r = 0; r < k; ++r) {
            graph.indices[i * k + r] = entries[r].index;
            graph.distances[i * k + r] = std::sqrt(static_cast<double>(entries[r].dist));
        }
    }
    return graph;
}

KnnGraph build_knn(const FeatureMatrix& features, std::size_t k, std::uint64_t seed, const KnnOptions& options) {
    if (features.rows() <= options.exact_limit) {
        return exact_knn(features, k, options.threads);
    }
    return nn_descent(features, k, seed, options);
}

}  // namespace npcluster::manifold
