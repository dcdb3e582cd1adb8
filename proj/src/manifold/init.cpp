#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "npcluster/errors.hpp"
#include "npcluster/logging.hpp"
#include "npcluster/manifold.hpp"
#include "npcluster/random.hpp"

namespace npcluster::manifold {

namespace {

constexpr double kInitScale = 10.0;
constexpr double kJitter = 1e-4;
constexpr std::size_t kDenseEigenLimit = 2048;
constexpr double kComponentRadius = 0.4;

struct Subgraph {
    std::vector<std::uint32_t> nodes;
    // Local-index edges.
    std::vector<FuzzyEdge> edges;
};

// Symmetric normalised adjacency D^-1/2 W D^-1/2 applied to a block.
class NormalizedAdjacency {
public:
    explicit NormalizedAdjacency(const Subgraph& g) : m_(g.nodes.size()), edges_(g.edges) {
        Eigen::VectorXd degree = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_));
        for (const auto& e : edges_) {
            degree[e.i] += e.weight;
            degree[e.j] += e.weight;
        }
        inv_sqrt_ = degree.cwiseSqrt().cwiseInverse();
        sqrt_degree_ = degree.cwiseSqrt();
    }

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
        Eigen::MatrixXd y = Eigen::MatrixXd::Zero(x.rows(), x.cols());
        for (const auto& e : edges_) {
            const double w = e.weight * inv_sqrt_[e.i] * inv_sqrt_[e.j];
            y.row(e.i) += w * x.row(e.j);
            y.row(e.j) += w * x.row(e.i);
        }
        return y;
    }

    Eigen::MatrixXd dense() const {
        const auto m = static_cast<Eigen::Index>(m_);
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
        for (const auto& e : edges_) {
            const double w = e.weight * inv_sqrt_[e.i] * inv_sqrt_[e.j];
            a(e.i, e.j) += w;
            a(e.j, e.i) += w;
        }
        return a;
    }

    const Eigen::VectorXd& sqrt_degree() const { return sqrt_degree_; }

private:
    std::size_t m_;
    const std::vector<FuzzyEdge>& edges_;
    Eigen::VectorXd inv_sqrt_;
    Eigen::VectorXd sqrt_degree_;
};

// Eigenvectors 2..dim+1 (ascending eigenvalue) of L = I - D^-1/2 W D^-1/2.
std::optional<Eigen::MatrixXd> dense_laplacian_vectors(const NormalizedAdjacency& adj, std::size_t dim) {
    const Eigen::MatrixXd a = adj.dense();
    const Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(a.rows(), a.cols()) - a;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
    if (solver.info() != Eigen::Success) return std::nullopt;
    return solver.eigenvectors().middleCols(1, static_cast<Eigen::Index>(dim));
}

// Block subspace iteration on I + A (spectrum in [0, 2]) with the known
// leading eigenvector sqrt(degree) projected out.
std::optional<Eigen::MatrixXd> iterative_laplacian_vectors(const NormalizedAdjacency& adj, std::size_t dim,
                                                           std::uint64_t seed) {
    const Eigen::Index m = adj.sqrt_degree().size();
    const Eigen::Index block = static_cast<Eigen::Index>(dim) + 8;
    const Eigen::VectorXd lead = adj.sqrt_degree().normalized();
    CounterRng rng(derive_seed(seed, 0x5e1f));
    Eigen::MatrixXd x(m, block);
    for (Eigen::Index j = 0; j < block; ++j)
        for (Eigen::Index i = 0; i < m; ++i) x(i, j) = rng.uniform(-1.0, 1.0);

    const auto shifted = [&](const Eigen::MatrixXd& v) { return Eigen::MatrixXd(v + adj.apply(v)); };
    const auto deflate = [&](Eigen::MatrixXd& v) { v -= lead * (lead.transpose() * v); };

    constexpr int kMaxIterations = 3000;
    constexpr double kTolerance = 1e-6;
    for (int iter = 1; iter <= kMaxIterations; ++iter) {
        deflate(x);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
        x = qr.householderQ() * Eigen::MatrixXd::Identity(m, block);
        Eigen::MatrixXd mx = shifted(x);
        if (iter % 10 == 0 || iter == kMaxIterations) {
            // Rayleigh-Ritz on the current basis.
            const Eigen::MatrixXd h = x.transpose() * mx;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(0.5 * (h + h.transpose()));
            const Eigen::MatrixXd ritz = x * small.eigenvectors();
            const Eigen::MatrixXd mritz = mx * small.eigenvectors();
            double worst = 0.0;
            for (Eigen::Index j = block - static_cast<Eigen::Index>(dim); j < block; ++j) {
                worst = std::max(worst, (mritz.col(j) - small.eigenvalues()[j] * ritz.col(j)).norm());
            }
            if (worst < kTolerance) {
                // Largest of I + A first, i.e. smallest Laplacian eigenvalue first.
                return ritz.rightCols(static_cast<Eigen::Index>(dim)).rowwise().reverse();
            }
            x = ritz;
            mx = mritz;
        }
        x = mx;
    }
    return std::nullopt;
}

void place_randomly(std::span<const std::uint32_t> nodes, std::size_t dim, CounterRng& rng,
                    std::vector<double>& coords) {
    for (auto v : nodes)
        for (std::size_t c = 0; c < dim; ++c) coords[v * dim + c] = rng.uniform(-1.0, 1.0);
}

}  // namespace

EmbeddingMatrix initialize_embedding(const FuzzyGraph& graph, std::size_t dim, InitMethod method,
                                     std::uint64_t seed) {
    if (dim == 0) throw PreconditionError("embedding dimension must be positive");
    if (graph.n == 0) throw PreconditionError("cannot initialise an empty graph");
    const std::size_t n = graph.n;
    std::vector<double> coords(n * dim);
    CounterRng rng(derive_seed(seed, 0x1417));

    if (method == InitMethod::random) {
        for (auto& v : coords) v = rng.uniform(-kInitScale, kInitScale);
        return EmbeddingMatrix(n, dim, std::move(coords));
    }

    std::size_t n_components = 0;
    const auto component = connected_components(graph, &n_components);
    std::vector<Subgraph> parts(n_components);
    std::vector<std::uint32_t> local(n);
    for (std::uint32_t v = 0; v < n; ++v) {
        auto& part = parts[component[v]];
        local[v] = static_cast<std::uint32_t>(part.nodes.size());
        part.nodes.push_back(v);
    }
    for (const auto& e : graph.edges) {
        parts[component[e.i]].edges.push_back({local[e.i], local[e.j], e.weight});
    }
    if (n_components > 1) {
        log_warning("fuzzy graph has " + std::to_string(n_components) +
                    " connected components; laying out each component separately");
    }

    const std::size_t grid_cols =
        dim == 1 ? n_components
                 : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_components))));
    for (std::size_t c = 0; c < n_components; ++c) {
        const auto& part = parts[c];
        std::vector<double> center(dim, 0.0);
        if (n_components > 1) {
            center[0] = static_cast<double>(c % grid_cols);
            if (dim > 1) center[1] = static_cast<double>(c / grid_cols);
        }
        const double radius = n_components > 1 ? kComponentRadius : 1.0;

        std::optional<Eigen::MatrixXd> vectors;
        if (part.nodes.size() > dim + 1) {
            NormalizedAdjacency adj(part);
            vectors = part.nodes.size() <= kDenseEigenLimit ? dense_laplacian_vectors(adj, dim)
                                                            : iterative_laplacian_vectors(adj, dim, seed + c);
            if (!vectors) {
                log_warning("spectral initialisation failed for a component of " +
                            std::to_string(part.nodes.size()) + " nodes; using random placement");
            }
        }
        if (!vectors) {
            place_randomly(part.nodes, dim, rng, coords);
            for (auto v : part.nodes)
                for (std::size_t k = 0; k < dim; ++k) coords[v * dim + k] = center[k] + radius * coords[v * dim + k];
            continue;
        }
        const double max_abs = vectors->cwiseAbs().maxCoeff();
        const double scale = max_abs > 0.0 ? radius / max_abs : 0.0;
        for (std::size_t r = 0; r < part.nodes.size(); ++r) {
            const auto v = part.nodes[r];
            for (std::size_t k = 0; k < dim; ++k) {
                coords[v * dim + k] =
                    center[k] + scale * (*vectors)(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
            }
        }
    }

    double max_abs = 0.0;
    for (double v : coords) max_abs = std::max(max_abs, std::abs(v));
    const double expand = max_abs > 0.0 ? kInitScale / max_abs : 1.0;
    for (auto& v : coords) v = v * expand + rng.uniform(-kJitter, kJitter);
    return EmbeddingMatrix(n, dim, std::move(coords));
}

}  // namespace npcluster::manifold
