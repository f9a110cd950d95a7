#include "bsde/quadrature.hpp"

#include <cmath>
#include <limits>

#include "bsde/errors.hpp"

namespace bsde {

namespace {

struct SimpsonPanel {
    double value;
    double f_lo, f_mid, f_hi;
};

SimpsonPanel simpson(const std::function<double(double)>& f, double lo, double hi,
                     double f_lo, double f_hi) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = f(mid);
    return {(hi - lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi), f_lo, f_mid, f_hi};
}

double adapt(const std::function<double(double)>& f, double lo, double hi,
             const SimpsonPanel& whole, double eps, int depth) {
    const double mid = 0.5 * (lo + hi);
    const SimpsonPanel left = simpson(f, lo, mid, whole.f_lo, whole.f_mid);
    const SimpsonPanel right = simpson(f, mid, hi, whole.f_mid, whole.f_hi);
    const double delta = left.value + right.value - whole.value;
    if (!std::isfinite(delta))
        throw ConfigurationError("quadrature encountered a non-finite integrand");
    if (std::fabs(delta) <= 15.0 * eps)
        return left.value + right.value + delta / 15.0;
    if (depth <= 0)
        throw ConfigurationError("quadrature did not converge to the requested tolerance");
    return adapt(f, lo, mid, left, 0.5 * eps, depth - 1) +
           adapt(f, mid, hi, right, 0.5 * eps, depth - 1);
}

} // namespace

double integrate(const std::function<double(double)>& f, double lo, double hi,
                 double rel_tol, double abs_tol) {
    if (lo == hi)
        return 0.0;
    if (lo > hi)
        return -integrate(f, hi, lo, rel_tol, abs_tol);

    const double f_lo = f(lo), f_hi = f(hi);
    const SimpsonPanel whole = simpson(f, lo, hi, f_lo, f_hi);
    // Coarse scale estimate over four panels to set the error budget.
    const double mid = 0.5 * (lo + hi);
    const SimpsonPanel l = simpson(f, lo, mid, f_lo, whole.f_mid);
    const SimpsonPanel r = simpson(f, mid, hi, whole.f_mid, f_hi);
    const double scale = std::fabs(l.value) + std::fabs(r.value);
    const double eps = std::max(abs_tol, rel_tol * std::max(scale, 1e-300));
    return adapt(f, lo, hi, whole, eps, 60);
}

GaussHermiteRule gauss_hermite(unsigned order) {
    if (order == 0)
        throw ConfigurationError("Gauss-Hermite order must be positive");
    const unsigned n = order;
    std::vector<double> x(n), w(n);
    const double pim4 = 0.7511255444649425; // pi^(-1/4)
    const unsigned m = (n + 1) / 2;
    double z = 0.0, pp = 0.0, z_prev1 = 0.0, z_prev2 = 0.0;
    for (unsigned i = 0; i < m; ++i) {
        if (i == 0) {
            z = std::sqrt(2.0 * n + 1.0) -
                1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
        } else if (i == 1) {
            z -= 1.14 * std::pow(n, 0.426) / z;
        } else if (i == 2) {
            z = 1.86 * z - 0.86 * z_prev2;
        } else if (i == 3) {
            z = 1.91 * z - 0.91 * z_prev2;
        } else {
            z = 2.0 * z - z_prev2;
        }
        for (int it = 0; it < 100; ++it) {
            double p1 = pim4, p2 = 0.0;
            for (unsigned j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::fabs(z - z1) <= 1e-15 * std::max(1.0, std::fabs(z)))
                break;
        }
        z_prev2 = z_prev1;
        z_prev1 = z;
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // Map from weight e^{-x^2} to the standard normal law and normalize.
    GaussHermiteRule rule;
    rule.points.resize(n);
    rule.weights.resize(n);
    const double sqrt2 = std::sqrt(2.0);
    double total = 0.0;
    for (unsigned i = 0; i < n; ++i)
        total += w[i];
    for (unsigned i = 0; i < n; ++i) {
        rule.points[i] = sqrt2 * x[n - 1 - i]; // ascending order
        rule.weights[i] = w[n - 1 - i] / total;
    }
    return rule;
}

} // namespace bsde
