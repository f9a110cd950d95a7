#include "bsde/fdiff.hpp"

#include "bsde/errors.hpp"

namespace bsde {

namespace {

// Derivative weights of the quadratic through (x0, x1, x2) evaluated at xe.
void quad_first(double x0, double x1, double x2, double xe, double& c0, double& c1,
                double& c2) {
    c0 = (2.0 * xe - x1 - x2) / ((x0 - x1) * (x0 - x2));
    c1 = (2.0 * xe - x0 - x2) / ((x1 - x0) * (x1 - x2));
    c2 = (2.0 * xe - x0 - x1) / ((x2 - x0) * (x2 - x1));
}

void quad_second(double x0, double x1, double x2, double& c0, double& c1, double& c2) {
    c0 = 2.0 / ((x0 - x1) * (x0 - x2));
    c1 = 2.0 / ((x1 - x0) * (x1 - x2));
    c2 = 2.0 / ((x2 - x0) * (x2 - x1));
}

} // namespace

std::vector<double> lattice_gradient(std::span<const double> x, std::span<const double> u) {
    const std::size_t m = x.size();
    if (m < 2 || u.size() != m)
        throw ConfigurationError("gradient needs >= 2 matching nodes");
    std::vector<double> d(m);
    if (m == 2) {
        d[0] = d[1] = (u[1] - u[0]) / (x[1] - x[0]);
        return d;
    }
    for (std::size_t k = 0; k < m; ++k) {
        const auto s = first_derivative_stencil(x, k);
        d[k] = s.c0 * u[s.i0] + s.c1 * u[s.i0 + 1] + s.c2 * u[s.i0 + 2];
    }
    return d;
}

std::vector<double> lattice_second(std::span<const double> x, std::span<const double> u) {
    const std::size_t m = x.size();
    if (m < 3 || u.size() != m)
        throw ConfigurationError("second difference needs >= 3 matching nodes");
    std::vector<double> d(m);
    for (std::size_t k = 0; k < m; ++k) {
        const auto s = second_derivative_stencil(x, k);
        d[k] = s.c0 * u[s.i0] + s.c1 * u[s.i0 + 1] + s.c2 * u[s.i0 + 2];
    }
    return d;
}

Stencil3 second_derivative_stencil(std::span<const double> x, std::size_t k) {
    const std::size_t m = x.size();
    const std::size_t i0 = (k == 0) ? 0 : (k == m - 1 ? m - 3 : k - 1);
    Stencil3 s{i0, 0.0, 0.0, 0.0};
    quad_second(x[i0], x[i0 + 1], x[i0 + 2], s.c0, s.c1, s.c2);
    return s;
}

Stencil3 first_derivative_stencil(std::span<const double> x, std::size_t k) {
    const std::size_t m = x.size();
    const std::size_t i0 = (k == 0) ? 0 : (k == m - 1 ? m - 3 : k - 1);
    Stencil3 s{i0, 0.0, 0.0, 0.0};
    quad_first(x[i0], x[i0 + 1], x[i0 + 2], x[k], s.c0, s.c1, s.c2);
    return s;
}

} // namespace bsde
