#include <cmath>

#include "npcluster/dpgmm.hpp"
#include "npcluster/errors.hpp"
#include "npcluster/parallel.hpp"

namespace npcluster::dpgmm {

DpgmmState fit_single(const EmbeddingMatrix& y, const DpgmmConfig& config, std::uint64_t init_seed) {
    DpgmmState state = init_state(y, config, init_seed);
    RowMatrixXd log_rho = log_responsibilities(state, y);
    RowMatrixXd log_r;
    double previous = elbo(state, log_rho);
    state.elbo_trace.push_back(previous);
    for (std::size_t iter = 1; iter <= config.max_iter; ++iter) {
        update_responsibilities(state, log_rho, &log_r);
        update_components(state, y);
        log_rho = log_responsibilities(state, y);
        const double current = elbo(state, log_rho, &log_r);
        state.elbo_trace.push_back(current);
        state.iterations = iter;
        if (std::abs(current - previous) <= config.convergence_tol * std::abs(previous)) {
            state.converged = true;
            break;
        }
        previous = current;
    }
    return state;
}

FitResult fit(const EmbeddingMatrix& y, const DpgmmConfig& config) {
    config.validate(y.cols());
    if (y.rows() < 2) throw PreconditionError("the mixture needs at least 2 samples");
    const std::size_t workers = config.threads == 0 ? default_thread_count() : config.threads;

    // Restarts run side by side; each keeps the inner loops single-threaded.
    std::vector<DpgmmState> runs(config.n_init);
    DpgmmConfig inner = config;
    inner.threads = workers >= config.n_init ? workers / config.n_init : 1;
    parallel_for(config.n_init, std::min(workers, config.n_init), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) runs[i] = fit_single(y, inner, config.seed + i);
    });

    FitResult out;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        out.run_elbos.push_back(runs[i].elbo_trace.back());
        if (out.run_elbos[i] > out.run_elbos[out.best_run]) out.best_run = i;
    }
    out.state = std::move(runs[out.best_run]);
    out.result = extract_result(out.state, y);
    return out;
}

ClusterResult extract_result(const DpgmmState& state, const EmbeddingMatrix& y) {
    const auto& r = state.responsibilities;
    const std::size_t n = y.rows();
    const std::size_t k_max = state.size();
    ClusterResult out;
    out.labels.resize(n);
    std::vector<bool> used(k_max, false);
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::Index best = 0;
        const auto row = r.row(static_cast<Eigen::Index>(i));
        for (Eigen::Index k = 1; k < row.size(); ++k) {
            if (row[k] > row[best]) best = k;  // strict: ties keep the lowest index
        }
        out.labels[i] = static_cast<Label>(best);
        used[static_cast<std::size_t>(best)] = true;
    }
    for (bool u : used) out.inferred_k += u;
    out.mixture_weights = expected_weights(state.stick_a, state.stick_b);
    for (const auto& c : state.components) {
        out.component_means.push_back(c.mean);
        // Inverse of the expected precision nu_k W_k.
        out.component_covariances.push_back(c.scale.inverse() / c.dof);
    }
    return out;
}

}  // namespace npcluster::dpgmm
