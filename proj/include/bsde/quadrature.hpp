#pragma once

#include <functional>
#include <vector>

namespace bsde {

// Adaptive Simpson integration of f over [lo, hi].
// Throws ConfigurationError when the requested tolerance cannot be reached
// (non-integrable or wildly oscillatory integrands).
double integrate(const std::function<double(double)>& f, double lo, double hi,
                 double rel_tol, double abs_tol = 1e-14);

// Nodes and weights for E[phi(Z)] with Z standard normal:
// E[phi(Z)] ~= sum_i weights[i] * phi(points[i]).  Weights sum to 1.
struct GaussHermiteRule {
    std::vector<double> points;
    std::vector<double> weights;
};

GaussHermiteRule gauss_hermite(unsigned order);

} // namespace bsde
