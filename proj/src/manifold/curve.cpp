#include <array>
#include <cmath>
#include <string>

#include "npcluster/errors.hpp"
#include "npcluster/manifold.hpp"

namespace npcluster::manifold {

double curve_kernel(const CurveParams& params, double t) {
    return 1.0 / (1.0 + params.a * std::pow(t, 2.0 * params.b));
}

namespace {

constexpr int kSamples = 300;
constexpr int kMaxIterations = 200;

struct Samples {
    std::array<double, kSamples> t;
    std::array<double, kSamples> target;
};

Samples make_samples(double min_dist, double spread) {
    Samples s;
    const double top = 3.0 * spread;
    for (int i = 0; i < kSamples; ++i) {
        const double t = top * static_cast<double>(i) / (kSamples - 1);
        s.t[i] = t;
        s.target[i] = t < min_dist ? 1.0 : std::exp(-(t - min_dist) / spread);
    }
    return s;
}

double cost(const Samples& s, const CurveParams& p) {
    double c = 0.0;
    for (int i = 0; i < kSamples; ++i) {
        const double r = curve_kernel(p, s.t[i]) - s.target[i];
        c += r * r;
    }
    return c;
}

}  // namespace

CurveFit fit_curve(double min_dist, double spread) {
    if (!(spread > 0.0)) {
        throw PreconditionError("spread must be positive");
    }
    if (min_dist < 0.0) {
        throw PreconditionError("min_dist must be non-negative");
    }
    const Samples s = make_samples(min_dist, spread);
    CurveParams p{1.0, 1.0};
    double current = cost(s, p);
    double damping = 1e-3;

    for (int iter = 1; iter <= kMaxIterations; ++iter) {
        // Normal equations of the Gauss-Newton step.
        double jaa = 0, jab = 0, jbb = 0, ga = 0, gb = 0;
        for (int i = 0; i < kSamples; ++i) {
            const double t = s.t[i];
            if (t <= 0.0) continue;  // f(0) = 1 for every (a, b): zero residual and gradient
            const double u = std::pow(t, 2.0 * p.b);
            const double denom = 1.0 + p.a * u;
            const double f = 1.0 / denom;
            const double r = f - s.target[i];
            const double da = -u / (denom * denom);
            const double db = -p.a * u * 2.0 * std::log(t) / (denom * denom);
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        bool accepted = false;
        while (damping < 1e12) {
            const double maa = jaa * (1.0 + damping);
            const double mbb = jbb * (1.0 + damping);
            const double det = maa * mbb - jab * jab;
            if (det <= 0.0) {
                damping *= 10.0;
                continue;
            }
            const double step_a = -(mbb * ga - jab * gb) / det;
            const double step_b = -(maa * gb - jab * ga) / det;
            const CurveParams trial{p.a + step_a, p.b + step_b};
            if (trial.a > 0.0 && trial.b > 0.0) {
                const double trial_cost = cost(s, trial);
                if (trial_cost <= current) {
                    const double improvement = current - trial_cost;
                    p = trial;
                    current = trial_cost;
                    damping = std::max(damping * 0.1, 1e-12);
                    accepted = true;
                    if (improvement <= 1e-14 * current ||
                        std::abs(step_a) + std::abs(step_b) < 1e-12 * (p.a + p.b)) {
                        return {p, std::sqrt(current / kSamples), iter};
                    }
                    break;
                }
            }
            damping *= 10.0;
        }
        if (!accepted) {
            // No downhill step at any damping: at a stationary point.
            return {p, std::sqrt(current / kSamples), iter};
        }
    }
    throw NumericalError("output kernel fit did not converge in " + std::to_string(kMaxIterations) +
                         " iterations (min_dist=" + std::to_string(min_dist) +
                         ", spread=" + std::to_string(spread) + ")");
}

CurveParams fit_curve_params(double min_dist, double spread) { return fit_curve(min_dist, spread).params; }

}  // namespace npcluster::manifold
