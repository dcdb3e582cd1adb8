#include <boost/math/special_functions/digamma.hpp>
#include <string>

#include "npcluster/dpgmm.hpp"
#include "npcluster/errors.hpp"

namespace npcluster::dpgmm {

std::vector<double> stick_breaking_weights(std::span<const double> phi) {
    if (phi.empty()) throw PreconditionError("stick-breaking needs at least one stick");
    for (std::size_t k = 0; k < phi.size(); ++k) {
        if (!(phi[k] >= 0.0 && phi[k] <= 1.0)) {
            throw PreconditionError("stick fraction phi[" + std::to_string(k) + "] is outside [0, 1]");
        }
    }
    if (phi.back() != 1.0) throw PreconditionError("the last stick fraction must be 1 under truncation");
    std::vector<double> weights(phi.size());
    double remaining = 1.0;
    for (std::size_t k = 0; k < phi.size(); ++k) {
        weights[k] = phi[k] * remaining;
        remaining *= 1.0 - phi[k];
    }
    return weights;
}

std::vector<double> expected_log_weights(std::span<const double> a, std::span<const double> b) {
    using boost::math::digamma;
    std::vector<double> out(a.size());
    double carried = 0.0;  // sum_{j<k} E[log(1 - phi_j)]
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double total = digamma(a[k] + b[k]);
        out[k] = digamma(a[k]) - total + carried;
        carried += digamma(b[k]) - total;
    }
    return out;
}

std::vector<double> expected_weights(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(a.size());
    double remaining = 1.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        out[k] = remaining * a[k] / (a[k] + b[k]);
        remaining *= b[k] / (a[k] + b[k]);
    }
    return out;
}

}  // namespace npcluster::dpgmm
