#pragma once

// Truncated stick-breaking Dirichlet process Gaussian mixture fit by
// mean-field coordinate ascent.
//
// Model (K = max_components):
//   phi_k ~ Beta(1, alpha),  pi_k = phi_k * prod_{j<k} (1 - phi_j)
//   (mu_k, Lambda_k) ~ N(mu | m0, (gamma Lambda)^-1) W(Lambda | W0, nu0)
//   z_n ~ Categorical(pi),   y_n | z_n = k ~ N(mu_k, Lambda_k^-1)
// Variational family: Beta(a_k, b_k) x Normal-Wishart(m_k, beta_k, W_k, nu_k)
// x Categorical(r_n). Every one of the K sticks carries a Beta factor, so the
// expected weights sum to at most one.

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "npcluster/core_data.hpp"

namespace npcluster::dpgmm {

enum class ScaleMatrixMode { empirical_precision, identity };
enum class PriorMeanMode { empirical, zero };

struct DpgmmConfig {
    std::size_t max_components = 50;
    double concentration = 1.0 / 50.0;
    double mean_precision = 0.01;
    // Unset means the embedding dimension p.
    std::optional<double> wishart_dof;
    ScaleMatrixMode scale_matrix_mode = ScaleMatrixMode::empirical_precision;
    PriorMeanMode prior_mean = PriorMeanMode::empirical;
    std::size_t max_iter = 200;
    std::size_t n_init = 5;
    // Stop when the relative ELBO change falls to this level.
    double convergence_tol = 1e-6;
    std::uint64_t seed = 0;
    // 0 selects default_thread_count().
    std::size_t threads = 0;

    void validate(std::size_t dim) const;
};

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Prior {
    double concentration = 0.0;
    Eigen::VectorXd mean;          // m0
    double mean_precision = 0.0;   // gamma
    double dof = 0.0;              // nu0
    Eigen::MatrixXd scale;         // W0
    Eigen::MatrixXd scale_inverse; // W0^-1
    double log_det_scale = 0.0;    // log |W0|
};

// m0 from prior_mean; W0 = D / nu0 with D the ridge-regularised inverse of
// the sample covariance (or the identity), so that E[Lambda] = D a priori.
Prior make_prior(const EmbeddingMatrix& y, const DpgmmConfig& config);

struct NormalWishart {
    Eigen::VectorXd mean;          // m_k
    double mean_precision = 0.0;   // beta_k
    Eigen::MatrixXd scale;         // W_k
    double dof = 0.0;              // nu_k
    double log_det_scale = 0.0;    // log |W_k|
};

struct DpgmmState {
    Prior prior;
    std::vector<double> stick_a;
    std::vector<double> stick_b;
    std::vector<NormalWishart> components;
    RowMatrixXd responsibilities;  // n x K, rows sum to one
    std::vector<double> elbo_trace;
    std::size_t iterations = 0;
    bool converged = false;
    std::uint64_t init_seed = 0;
    std::size_t threads = 1;

    std::size_t size() const { return components.size(); }
};

struct ClusterResult {
    LabelVector labels;
    std::size_t inferred_k = 0;
    std::vector<double> mixture_weights;
    std::vector<Eigen::VectorXd> component_means;
    std::vector<Eigen::MatrixXd> component_covariances;
};

// pi_k = phi_k * prod_{j<k} (1 - phi_j). Entries must lie in [0, 1] and the
// last must be 1 so the weights sum to one.
std::vector<double> stick_breaking_weights(std::span<const double> phi);

// E[log pi_k] under independent Beta(a_k, b_k) sticks.
std::vector<double> expected_log_weights(std::span<const double> a, std::span<const double> b);

// E[pi_k] = E[phi_k] prod_{j<k} E[1 - phi_j].
std::vector<double> expected_weights(std::span<const double> a, std::span<const double> b);

// E[log |Lambda|] for Lambda ~ W(W, nu).
double expected_log_det_precision(const NormalWishart& c);

// K-Means (K = min(max_components, n)) hard assignment as responsibilities,
// followed by one update_components pass.
DpgmmState init_state(const EmbeddingMatrix& y, const DpgmmConfig& config, std::uint64_t init_seed);

// Builds a state from given responsibilities (n x K) and runs update_components.
DpgmmState state_from_responsibilities(const EmbeddingMatrix& y, const Prior& prior, RowMatrixXd responsibilities);

// Unnormalised log rho_nk of the E-step.
RowMatrixXd log_responsibilities(const DpgmmState& state, const EmbeddingMatrix& y);
void update_responsibilities(DpgmmState& state, const EmbeddingMatrix& y);
// E-step from precomputed log rho; optionally returns log r_nk as well.
void update_responsibilities(DpgmmState& state, const RowMatrixXd& log_rho, RowMatrixXd* log_r = nullptr);
void update_components(DpgmmState& state, const EmbeddingMatrix& y);

struct ElboTerms {
    double likelihood = 0.0;       // E[log p(y | z, mu, Lambda)]
    double assignment_prior = 0.0; // E[log p(z | phi)]
    double stick_prior = 0.0;      // E[log p(phi)]
    double component_prior = 0.0;  // E[log p(mu, Lambda)]
    double assignment_q = 0.0;     // E[log q(z)]
    double stick_q = 0.0;          // E[log q(phi)]
    double component_q = 0.0;      // E[log q(mu, Lambda)]

    double total() const {
        return likelihood + assignment_prior + stick_prior + component_prior - assignment_q - stick_q - component_q;
    }
};

ElboTerms elbo_terms(const DpgmmState& state, const EmbeddingMatrix& y);
double elbo(const DpgmmState& state, const EmbeddingMatrix& y);
// Same, reusing log rho of the current components (as the next E-step needs
// it anyway) and, when given, log r from the last E-step.
ElboTerms elbo_terms(const DpgmmState& state, const RowMatrixXd& log_rho, const RowMatrixXd* log_r = nullptr);
double elbo(const DpgmmState& state, const RowMatrixXd& log_rho, const RowMatrixXd* log_r = nullptr);

// One coordinate-ascent run from a given init seed.
DpgmmState fit_single(const EmbeddingMatrix& y, const DpgmmConfig& config, std::uint64_t init_seed);

struct FitResult {
    DpgmmState state;
    ClusterResult result;
    // Final ELBO of each restart, in init order.
    std::vector<double> run_elbos;
    std::size_t best_run = 0;
};

// n_init restarts seeded seed, seed+1, ...; the highest final ELBO wins.
FitResult fit(const EmbeddingMatrix& y, const DpgmmConfig& config);

ClusterResult extract_result(const DpgmmState& state, const EmbeddingMatrix& y);

}  // namespace npcluster::dpgmm
