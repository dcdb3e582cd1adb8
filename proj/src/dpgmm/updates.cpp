#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <numbers>
#include <string>

#include "npcluster/dpgmm.hpp"
#include "npcluster/errors.hpp"
#include "npcluster/kmeans.hpp"
#include "npcluster/parallel.hpp"

namespace npcluster::dpgmm {

namespace {

constexpr double kEmptyComponent = 1e-10;
constexpr double kPriorRidge = 1e-6;
constexpr double kRepairRidge = 1e-8;

// Inverts a symmetric positive-definite matrix, returning log|inverse|. One
// ridge repair is attempted before giving up.
Eigen::MatrixXd invert_spd(Eigen::MatrixXd m, double& log_det_inverse, const std::string& what) {
    m = 0.5 * (m + m.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
        const double ridge = kRepairRidge * m.trace() / static_cast<double>(m.rows());
        m.diagonal().array() += ridge;
        llt.compute(m);
        if (llt.info() != Eigen::Success) {
            throw NumericalError(what + " is not positive definite after ridge repair");
        }
    }
    const auto& l = llt.matrixL();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) log_det += 2.0 * std::log(l(i, i));
    log_det_inverse = -log_det;
    Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
    return 0.5 * (inv + inv.transpose());
}

NormalWishart prior_component(const Prior& prior) {
    return {prior.mean, prior.mean_precision, prior.scale, prior.dof, prior.log_det_scale};
}

// Rows [begin, end) of log rho. P > 0 fixes the dimension at compile time so
// the small loops unroll; P = 0 reads it from the data.
template <std::size_t P>
void log_rho_rows(const EmbeddingMatrix& y, const std::vector<double>& means, const std::vector<double>& packed,
                  const std::vector<double>& offset, RowMatrixXd& log_rho, std::size_t begin, std::size_t end) {
    const std::size_t pp = P > 0 ? P : y.cols();
    const std::size_t tri = pp * (pp + 1) / 2;
    const std::size_t k_max = offset.size();
    std::vector<double> d(pp);
    for (std::size_t i = begin; i < end; ++i) {
        const double* yi = y.row(i).data();
        double* out = log_rho.data() + i * k_max;
        for (std::size_t k = 0; k < k_max; ++k) {
            const double* mk = means.data() + k * pp;
            for (std::size_t a = 0; a < pp; ++a) d[a] = yi[a] - mk[a];
            const double* w = packed.data() + k * tri;
            double q = 0.0;
            for (std::size_t b = 0; b < pp; ++b)
                for (std::size_t a = b; a < pp; ++a) q += *w++ * d[a] * d[b];
            out[k] = offset[k] - 0.5 * q;
        }
        for (std::size_t k = 0; k < k_max; ++k) {
            if (!std::isfinite(out[k])) {
                throw NumericalError("non-finite log responsibility for sample " + std::to_string(i) +
                                     " in component " + std::to_string(k));
            }
        }
    }
}

std::size_t resolve_threads(std::size_t t) { return t == 0 ? default_thread_count() : t; }

}  // namespace

void DpgmmConfig::validate(std::size_t dim) const {
    if (max_components < 1) throw ConfigError("max_components must be at least 1");
    if (!(concentration > 0.0)) throw ConfigError("concentration must be positive");
    if (!(mean_precision > 0.0)) throw ConfigError("mean_precision must be positive");
    if (wishart_dof && !(*wishart_dof >= static_cast<double>(dim))) {
        throw ConfigError("wishart_dof must be at least the embedding dimension " + std::to_string(dim));
    }
    if (n_init < 1) throw ConfigError("n_init must be at least 1");
    if (!(convergence_tol >= 0.0)) throw ConfigError("convergence_tol must be non-negative");
}

Prior make_prior(const EmbeddingMatrix& y, const DpgmmConfig& config) {
    const auto n = static_cast<Eigen::Index>(y.rows());
    const auto p = static_cast<Eigen::Index>(y.cols());
    if (n < 2) throw PreconditionError("the mixture needs at least 2 samples");
    Eigen::Map<const RowMatrixXd> data(y.values().data(), n, p);
    const Eigen::VectorXd mean = data.colwise().mean().transpose();

    Prior prior;
    prior.concentration = config.concentration;
    prior.mean_precision = config.mean_precision;
    prior.dof = config.wishart_dof.value_or(static_cast<double>(p));
    prior.mean = config.prior_mean == PriorMeanMode::empirical ? mean : Eigen::VectorXd::Zero(p);

    if (config.scale_matrix_mode == ScaleMatrixMode::empirical_precision) {
        const RowMatrixXd centered = data.rowwise() - mean.transpose();
        Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
        const double trace = cov.trace();
        if (!(trace > 0.0)) throw PreconditionError("the embedding has zero variance");
        cov.diagonal().array() += kPriorRidge * trace / static_cast<double>(p);
        // W0^-1 = nu0 * covariance, hence E[Lambda] = nu0 W0 = covariance^-1.
        prior.scale_inverse = prior.dof * cov;
    } else {
        prior.scale_inverse = prior.dof * Eigen::MatrixXd::Identity(p, p);
    }
    prior.scale = invert_spd(prior.scale_inverse, prior.log_det_scale, "prior scale matrix");
    return prior;
}

double expected_log_det_precision(const NormalWishart& c) {
    const auto p = static_cast<double>(c.mean.size());
    double s = p * std::numbers::ln2 + c.log_det_scale;
    for (Eigen::Index i = 1; i <= c.mean.size(); ++i) {
        s += boost::math::digamma(0.5 * (c.dof + 1.0 - static_cast<double>(i)));
    }
    return s;
}

void update_components(DpgmmState& state, const EmbeddingMatrix& y) {
    const auto& prior = state.prior;
    const auto& r = state.responsibilities;
    const std::size_t n = y.rows();
    const auto p = static_cast<Eigen::Index>(y.cols());
    const std::size_t k_max = static_cast<std::size_t>(r.cols());
    if (static_cast<std::size_t>(r.rows()) != n) {
        throw PreconditionError("responsibilities have " + std::to_string(r.rows()) + " rows, data has " +
                                std::to_string(n));
    }
    std::vector<double> counts(k_max, 0.0);
    state.components.resize(k_max);

    // Sufficient statistics are accumulated row by row (R is row-major);
    // workers own disjoint component ranges.
    const auto pp = static_cast<std::size_t>(p);
    parallel_for(k_max, state.threads, [&](std::size_t begin, std::size_t end) {
        const std::size_t width = end - begin;
        std::vector<double> nk(width, 0.0), sum(width * pp, 0.0), xbar(width * pp, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* yi = y.row(i).data();
            const double* ri = r.data() + i * k_max + begin;
            for (std::size_t k = 0; k < width; ++k) {
                const double w = ri[k];
                if (w == 0.0) continue;
                nk[k] += w;
                for (std::size_t a = 0; a < pp; ++a) sum[k * pp + a] += w * yi[a];
            }
        }
        for (std::size_t k = 0; k < width; ++k)
            for (std::size_t a = 0; a < pp; ++a) xbar[k * pp + a] = nk[k] > 0.0 ? sum[k * pp + a] / nk[k] : 0.0;

        std::vector<double> scatter(width * pp * pp, 0.0);  // N_k S_k, lower triangle
        std::vector<double> d(pp);
        for (std::size_t i = 0; i < n; ++i) {
            const double* yi = y.row(i).data();
            const double* ri = r.data() + i * k_max + begin;
            for (std::size_t k = 0; k < width; ++k) {
                const double w = ri[k];
                if (w == 0.0 || nk[k] < kEmptyComponent) continue;
                for (std::size_t a = 0; a < pp; ++a) d[a] = yi[a] - xbar[k * pp + a];
                double* s = scatter.data() + k * pp * pp;
                for (std::size_t b = 0; b < pp; ++b)
                    for (std::size_t a = b; a < pp; ++a) s[a * pp + b] += w * d[a] * d[b];
            }
        }

        for (std::size_t j = 0; j < width; ++j) {
            const std::size_t k = begin + j;
            if (nk[j] < kEmptyComponent) {
                counts[k] = 0.0;
                state.components[k] = prior_component(prior);
                continue;
            }
            counts[k] = nk[j];
            const Eigen::Map<const Eigen::VectorXd> mean_k(xbar.data() + j * pp, p);
            Eigen::MatrixXd s_k(p, p);
            for (Eigen::Index b = 0; b < p; ++b)
                for (Eigen::Index a = b; a < p; ++a)
                    s_k(a, b) = s_k(b, a) = scatter[j * pp * pp + static_cast<std::size_t>(a) * pp + static_cast<std::size_t>(b)];
            NormalWishart c;
            c.mean_precision = prior.mean_precision + nk[j];
            c.mean = (prior.mean_precision * prior.mean + nk[j] * mean_k) / c.mean_precision;
            c.dof = prior.dof + nk[j];
            const Eigen::VectorXd shift = mean_k - prior.mean;
            const Eigen::MatrixXd scale_inverse =
                prior.scale_inverse + s_k +
                (prior.mean_precision * nk[j] / (prior.mean_precision + nk[j])) * shift * shift.transpose();
            c.scale = invert_spd(scale_inverse, c.log_det_scale, "component " + std::to_string(k) + " scale matrix");
            state.components[k] = std::move(c);
        }
    });

    state.stick_a.assign(k_max, 1.0);
    state.stick_b.assign(k_max, prior.concentration);
    double tail = 0.0;  // sum_{j>k} N_j
    for (std::size_t k = k_max; k-- > 0;) {
        state.stick_a[k] = 1.0 + counts[k];
        state.stick_b[k] = prior.concentration + tail;
        tail += counts[k];
    }
}

RowMatrixXd log_responsibilities(const DpgmmState& state, const EmbeddingMatrix& y) {
    const std::size_t n = y.rows();
    const auto p = static_cast<double>(y.cols());
    const std::size_t k_max = state.size();
    const auto elog_pi = expected_log_weights(state.stick_a, state.stick_b);
    std::vector<double> offset(k_max);
    for (std::size_t k = 0; k < k_max; ++k) {
        const auto& c = state.components[k];
        offset[k] = elog_pi[k] + 0.5 * expected_log_det_precision(c) -
                    0.5 * p * std::log(2.0 * std::numbers::pi) - 0.5 * p / c.mean_precision;
        if (!std::isfinite(offset[k])) {
            throw NumericalError("non-finite expected log weight or log-determinant in component " +
                                 std::to_string(k));
        }
    }
    // Packed copies: means, and the lower triangle of nu_k W_k with doubled
    // off-diagonal entries so d' (nu W) d is a single sweep.
    const std::size_t pp = y.cols();
    const std::size_t tri = pp * (pp + 1) / 2;
    std::vector<double> means(k_max * pp), packed(k_max * tri);
    for (std::size_t k = 0; k < k_max; ++k) {
        const auto& c = state.components[k];
        std::size_t t = 0;
        for (std::size_t b = 0; b < pp; ++b) {
            means[k * pp + b] = c.mean[static_cast<Eigen::Index>(b)];
            for (std::size_t a = b; a < pp; ++a) {
                const double m = c.dof * c.scale(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
                packed[k * tri + t++] = a == b ? m : 2.0 * m;
            }
        }
    }
    RowMatrixXd log_rho(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k_max));
    parallel_for(n, state.threads, [&](std::size_t begin, std::size_t end) {
        switch (pp) {
            case 1: log_rho_rows<1>(y, means, packed, offset, log_rho, begin, end); break;
            case 2: log_rho_rows<2>(y, means, packed, offset, log_rho, begin, end); break;
            case 3: log_rho_rows<3>(y, means, packed, offset, log_rho, begin, end); break;
            default: log_rho_rows<0>(y, means, packed, offset, log_rho, begin, end); break;
        }
    });
    return log_rho;
}

void update_responsibilities(DpgmmState& state, const EmbeddingMatrix& y) {
    update_responsibilities(state, log_responsibilities(state, y));
}

void update_responsibilities(DpgmmState& state, const RowMatrixXd& log_rho, RowMatrixXd* log_r) {
    RowMatrixXd r(log_rho.rows(), log_rho.cols());
    if (log_r) log_r->resize(log_rho.rows(), log_rho.cols());
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        const double top = log_rho.row(i).maxCoeff();
        r.row(i) = (log_rho.row(i).array() - top).exp();
        const double z = r.row(i).sum();
        r.row(i) /= z;
        if (log_r) log_r->row(i) = log_rho.row(i).array() - (top + std::log(z));
    }
    state.responsibilities = std::move(r);
}

DpgmmState state_from_responsibilities(const EmbeddingMatrix& y, const Prior& prior, RowMatrixXd responsibilities) {
    DpgmmState state;
    state.prior = prior;
    state.responsibilities = std::move(responsibilities);
    update_components(state, y);
    return state;
}

DpgmmState init_state(const EmbeddingMatrix& y, const DpgmmConfig& config, std::uint64_t init_seed) {
    const std::size_t n = y.rows();
    config.validate(y.cols());
    if (n < 2) throw PreconditionError("the mixture needs at least 2 samples");
    bool distinct = false;
    for (std::size_t i = 1; i < n && !distinct; ++i) distinct = !std::equal(y.row(i).begin(), y.row(i).end(), y.row(0).begin());
    if (!distinct) throw PreconditionError("the mixture needs at least 2 distinct points");

    const std::size_t k = std::min(config.max_components, n);
    const auto km = baselines::kmeans_fit(y, k, 1, baselines::kDefaultKmeansIterations, init_seed);
    RowMatrixXd r = RowMatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(config.max_components));
    for (std::size_t i = 0; i < n; ++i) r(static_cast<Eigen::Index>(i), km.labels[i]) = 1.0;

    DpgmmState state;
    state.prior = make_prior(y, config);
    state.responsibilities = std::move(r);
    state.init_seed = init_seed;
    state.threads = resolve_threads(config.threads);
    update_components(state, y);
    return state;
}

}  // namespace npcluster::dpgmm
