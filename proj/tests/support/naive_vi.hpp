#pragma once

// Deliberately plain re-implementation of the mean-field updates and the
// ELBO, used as a cross-check for the Eigen code. Nothing here calls into
// the library: vectors of doubles, Gauss-Jordan inversion, its own digamma,
// and the ELBO assembled from closed-form KL divergences instead of the
// seven expectation terms.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace naive {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major, square or n x p

inline double digamma(double x) {
    double acc = 0.0;
    while (x < 10.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double x2 = 1.0 / (x * x);
    return acc + std::log(x) - 0.5 / x -
           x2 * (1.0 / 12 - x2 * (1.0 / 120 - x2 * (1.0 / 252 - x2 * (1.0 / 240 - x2 / 132))));
}

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, Vec(c, 0.0)); }

// Inverse and log-determinant by Gauss-Jordan with partial pivoting.
inline Mat inverse(Mat a, double* log_det = nullptr) {
    const std::size_t n = a.size();
    Mat inv = zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
    double ld = 0.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (a[piv][col] == 0.0) throw std::runtime_error("singular");
        std::swap(a[piv], a[col]);
        std::swap(inv[piv], inv[col]);
        const double d = a[col][col];
        ld += std::log(std::abs(d));
        for (std::size_t j = 0; j < n; ++j) {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r][col];
            for (std::size_t j = 0; j < n; ++j) {
                a[r][j] -= f * a[col][j];
                inv[r][j] -= f * inv[col][j];
            }
        }
    }
    if (log_det) *log_det = ld;
    return inv;
}

inline double quad(const Mat& w, const Vec& d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t j = 0; j < d.size(); ++j) s += d[i] * w[i][j] * d[j];
    return s;
}

struct Prior {
    double alpha, beta0, nu0;
    Vec m0;
    Mat w0, w0_inv;
};

struct Component {
    Vec m;
    double beta, nu;
    Mat w;
};

struct State {
    Vec a, b;
    std::vector<Component> comps;
    Mat r;  // n x K
};

// Empirical-mean, empirical-precision prior with the same ridge rule.
inline Prior make_prior(const Mat& y, double alpha, double beta0, double nu0) {
    const std::size_t n = y.size(), p = y[0].size();
    Prior pr{alpha, beta0, nu0, Vec(p, 0.0), {}, {}};
    for (const auto& row : y)
        for (std::size_t j = 0; j < p; ++j) pr.m0[j] += row[j] / static_cast<double>(n);
    Mat cov = zeros(p, p);
    for (const auto& row : y)
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < p; ++j)
                cov[i][j] += (row[i] - pr.m0[i]) * (row[j] - pr.m0[j]) / static_cast<double>(n - 1);
    double tr = 0.0;
    for (std::size_t i = 0; i < p; ++i) tr += cov[i][i];
    for (std::size_t i = 0; i < p; ++i) cov[i][i] += 1e-6 * tr / static_cast<double>(p);
    pr.w0_inv = cov;
    for (auto& row : pr.w0_inv)
        for (auto& v : row) v *= nu0;
    pr.w0 = inverse(pr.w0_inv);
    return pr;
}

inline void m_step(State& s, const Mat& y, const Prior& pr) {
    const std::size_t n = y.size(), p = y[0].size(), k_max = s.r[0].size();
    Vec nk(k_max, 0.0);
    s.comps.assign(k_max, {});
    for (std::size_t k = 0; k < k_max; ++k) {
        Vec xbar(p, 0.0);
        for (std::size_t i = 0; i < n; ++i) nk[k] += s.r[i][k];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < p; ++j) xbar[j] += s.r[i][k] * y[i][j] / nk[k];
        Mat winv = pr.w0_inv;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t a = 0; a < p; ++a)
                for (std::size_t b = 0; b < p; ++b)
                    winv[a][b] += s.r[i][k] * (y[i][a] - xbar[a]) * (y[i][b] - xbar[b]);
        const double f = pr.beta0 * nk[k] / (pr.beta0 + nk[k]);
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < p; ++b) winv[a][b] += f * (xbar[a] - pr.m0[a]) * (xbar[b] - pr.m0[b]);
        Component& c = s.comps[k];
        c.beta = pr.beta0 + nk[k];
        c.nu = pr.nu0 + nk[k];
        c.m.assign(p, 0.0);
        for (std::size_t j = 0; j < p; ++j) c.m[j] = (pr.beta0 * pr.m0[j] + nk[k] * xbar[j]) / c.beta;
        c.w = inverse(winv);
    }
    s.a.assign(k_max, 0.0);
    s.b.assign(k_max, 0.0);
    for (std::size_t k = 0; k < k_max; ++k) {
        s.a[k] = 1.0 + nk[k];
        s.b[k] = pr.alpha;
        for (std::size_t j = k + 1; j < k_max; ++j) s.b[k] += nk[j];
    }
}

inline double elog_det(const Component& c) {
    double ld = 0.0;
    inverse(c.w, &ld);
    const double p = static_cast<double>(c.m.size());
    double s = p * std::log(2.0) + ld;
    for (std::size_t i = 1; i <= c.m.size(); ++i) s += digamma(0.5 * (c.nu + 1.0 - static_cast<double>(i)));
    return s;
}

inline Vec elog_pi(const State& s) {
    Vec out(s.a.size());
    for (std::size_t k = 0; k < s.a.size(); ++k) {
        out[k] = digamma(s.a[k]) - digamma(s.a[k] + s.b[k]);
        for (std::size_t j = 0; j < k; ++j) out[k] += digamma(s.b[j]) - digamma(s.a[j] + s.b[j]);
    }
    return out;
}

// E[log N(y_i | mu_k, Lambda_k^-1)] under q.
inline double expected_loglik(const Component& c, const Vec& yi) {
    const double p = static_cast<double>(yi.size());
    Vec d(yi.size());
    for (std::size_t j = 0; j < yi.size(); ++j) d[j] = yi[j] - c.m[j];
    return 0.5 * elog_det(c) - 0.5 * p * std::log(2.0 * std::numbers::pi) - 0.5 * p / c.beta -
           0.5 * c.nu * quad(c.w, d);
}

inline void e_step(State& s, const Mat& y) {
    const Vec lp = elog_pi(s);
    for (std::size_t i = 0; i < y.size(); ++i) {
        Vec v(s.comps.size());
        double top = -INFINITY;
        for (std::size_t k = 0; k < v.size(); ++k) {
            v[k] = lp[k] + expected_loglik(s.comps[k], y[i]);
            top = std::max(top, v[k]);
        }
        double z = 0.0;
        for (auto& x : v) z += (x = std::exp(x - top));
        for (std::size_t k = 0; k < v.size(); ++k) s.r[i][k] = v[k] / z;
    }
}

inline double log_wishart_b(const Mat& w, double nu) {
    const double p = static_cast<double>(w.size());
    double ld = 0.0;
    inverse(w, &ld);
    double s = -0.5 * nu * ld - 0.5 * nu * p * std::log(2.0) - 0.25 * p * (p - 1.0) * std::log(std::numbers::pi);
    for (std::size_t i = 1; i <= w.size(); ++i) s -= std::lgamma(0.5 * (nu + 1.0 - static_cast<double>(i)));
    return s;
}

// KL(Beta(a, b) || Beta(1, alpha)).
inline double kl_beta(double a, double b, double alpha) {
    const double log_b_q = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    const double log_b_p = -std::log(alpha);
    return log_b_p - log_b_q + (a - 1.0) * digamma(a) + (b - alpha) * digamma(b) +
           (1.0 + alpha - a - b) * digamma(a + b);
}

// KL(NW(m, beta, W, nu) || NW(m0, beta0, W0, nu0)).
inline double kl_normal_wishart(const Component& c, const Prior& pr) {
    const std::size_t p = c.m.size();
    const double pd = static_cast<double>(p);
    const double eld = elog_det(c);
    double trace = 0.0;
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) trace += pr.w0_inv[i][j] * c.w[j][i];
    const double kl_wishart = log_wishart_b(c.w, c.nu) - log_wishart_b(pr.w0, pr.nu0) +
                              0.5 * (c.nu - pr.nu0) * eld - 0.5 * c.nu * pd + 0.5 * c.nu * trace;
    Vec d(p);
    for (std::size_t j = 0; j < p; ++j) d[j] = c.m[j] - pr.m0[j];
    const double kl_gauss =
        0.5 * (pd * pr.beta0 / c.beta - pd + pd * std::log(c.beta / pr.beta0) + pr.beta0 * c.nu * quad(c.w, d));
    return kl_wishart + kl_gauss;
}

inline double elbo(const State& s, const Mat& y, const Prior& pr) {
    const Vec lp = elog_pi(s);
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (std::size_t k = 0; k < s.comps.size(); ++k) {
            const double r = s.r[i][k];
            if (r == 0.0) continue;
            total += r * (expected_loglik(s.comps[k], y[i]) + lp[k] - std::log(r));
        }
    }
    for (std::size_t k = 0; k < s.comps.size(); ++k) {
        total -= kl_beta(s.a[k], s.b[k], pr.alpha);
        total -= kl_normal_wishart(s.comps[k], pr);
    }
    return total;
}

}  // namespace naive
