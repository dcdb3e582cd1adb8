#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <numbers>
#include <string>

#include "npcluster/dpgmm.hpp"
#include "npcluster/errors.hpp"
#include "quadratic.hpp"

namespace npcluster::dpgmm {

namespace {

// log of the Wishart normaliser B(W, nu).
double log_wishart_norm(double log_det_scale, double dof, double p) {
    double s = -0.5 * dof * log_det_scale - 0.5 * dof * p * std::numbers::ln2 -
               0.25 * p * (p - 1.0) * std::log(std::numbers::pi);
    for (int i = 1; i <= static_cast<int>(p); ++i) s -= std::lgamma(0.5 * (dof + 1.0 - i));
    return s;
}

}  // namespace

ElboTerms elbo_terms(const DpgmmState& state, const EmbeddingMatrix& y) {
    return elbo_terms(state, log_responsibilities(state, y));
}

ElboTerms elbo_terms(const DpgmmState& state, const RowMatrixXd& log_rho, const RowMatrixXd* log_r) {
    using boost::math::digamma;
    const auto& prior = state.prior;
    const auto& r = state.responsibilities;
    const std::size_t k_max = state.size();
    if (log_rho.rows() != r.rows() || log_rho.cols() != r.cols() ||
        (log_r && (log_r->rows() != r.rows() || log_r->cols() != r.cols()))) {
        throw PreconditionError("log responsibilities do not match the responsibility matrix");
    }
    const auto p = static_cast<double>(prior.mean.size());
    const auto elog_pi = expected_log_weights(state.stick_a, state.stick_b);
    const double prior_log_norm = log_wishart_norm(prior.log_det_scale, prior.dof, p);

    ElboTerms t;
    // log rho_nk = E[log pi_k] + E[log N(y_n | mu_k, Lambda_k^-1)].
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        for (Eigen::Index k = 0; k < r.cols(); ++k) {
            const double w = r(i, k);
            if (w == 0.0) continue;
            t.likelihood += w * (log_rho(i, k) - elog_pi[static_cast<std::size_t>(k)]);
            t.assignment_prior += w * elog_pi[static_cast<std::size_t>(k)];
            t.assignment_q += w * (log_r ? (*log_r)(i, k) : std::log(w));
        }
    }

    Eigen::VectorXd d(prior.mean.size());
    for (std::size_t k = 0; k < k_max; ++k) {
        const auto& c = state.components[k];
        const double elogdet = expected_log_det_precision(c);

        const double a = state.stick_a[k], b = state.stick_b[k];
        const double elog_phi = digamma(a) - digamma(a + b);
        const double elog_rest = digamma(b) - digamma(a + b);
        t.stick_prior += std::log(prior.concentration) + (prior.concentration - 1.0) * elog_rest;
        t.stick_q += std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * elog_phi + (b - 1.0) * elog_rest;

        d = c.mean - prior.mean;
        const double q = detail::quadratic_form(c.scale, d.data());
        const double trace_term = (prior.scale_inverse.cwiseProduct(c.scale)).sum();  // Tr(W0^-1 W_k)
        t.component_prior += 0.5 * (p * std::log(prior.mean_precision / (2.0 * std::numbers::pi)) + elogdet -
                                    p * prior.mean_precision / c.mean_precision - prior.mean_precision * c.dof * q) +
                             prior_log_norm + 0.5 * (prior.dof - p - 1.0) * elogdet - 0.5 * c.dof * trace_term;

        const double entropy_wishart = -log_wishart_norm(c.log_det_scale, c.dof, p) -
                                       0.5 * (c.dof - p - 1.0) * elogdet + 0.5 * c.dof * p;
        t.component_q += 0.5 * elogdet + 0.5 * p * std::log(c.mean_precision / (2.0 * std::numbers::pi)) - 0.5 * p -
                         entropy_wishart;
    }
    return t;
}

namespace {

double checked_total(const ElboTerms& t) {
    const std::pair<const char*, double> named[] = {
        {"likelihood", t.likelihood},           {"assignment prior", t.assignment_prior},
        {"stick prior", t.stick_prior},         {"component prior", t.component_prior},
        {"assignment entropy", t.assignment_q}, {"stick entropy", t.stick_q},
        {"component entropy", t.component_q},
    };
    for (const auto& [name, value] : named) {
        if (!std::isfinite(value)) throw NumericalError(std::string("non-finite ELBO term: ") + name);
    }
    return t.total();
}

}  // namespace

double elbo(const DpgmmState& state, const RowMatrixXd& log_rho, const RowMatrixXd* log_r) {
    return checked_total(elbo_terms(state, log_rho, log_r));
}

double elbo(const DpgmmState& state, const EmbeddingMatrix& y) { return checked_total(elbo_terms(state, y)); }

}  // namespace npcluster::dpgmm
