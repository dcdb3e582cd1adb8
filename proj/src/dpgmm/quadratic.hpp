#pragma once

#include <Eigen/Dense>

namespace npcluster::dpgmm::detail {

// d' M d for symmetric M, reading only the lower triangle. Plain loops beat
// Eigen's dynamic-size kernels at the small p used here.
inline double quadratic_form(const Eigen::MatrixXd& m, const double* d) {
    const Eigen::Index p = m.rows();
    double q = 0.0;
    for (Eigen::Index b = 0; b < p; ++b) {
        q += m(b, b) * d[b] * d[b];
        for (Eigen::Index a = b + 1; a < p; ++a) q += 2.0 * m(a, b) * d[a] * d[b];
    }
    return q;
}

}  // namespace npcluster::dpgmm::detail
