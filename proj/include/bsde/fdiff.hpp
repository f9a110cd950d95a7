#pragma once

#include <span>
#include <vector>

namespace bsde {

// First derivative on a (possibly nonuniform) strictly increasing lattice.
// Weighted 3-point central formula in the interior (exact on quadratics),
// 2-point one-sided at the ends.
std::vector<double> lattice_gradient(std::span<const double> x, std::span<const double> u);

// Second derivative, 3-point formulas; one-sided at the ends (exact on
// quadratics everywhere).
std::vector<double> lattice_second(std::span<const double> x, std::span<const double> u);

// Stencil coefficients of the 3-point second derivative at node k using the
// nodes (i0, i0+1, i0+2); used for matrix assembly.
struct Stencil3 {
    std::size_t i0;
    double c0, c1, c2;
};
Stencil3 second_derivative_stencil(std::span<const double> x, std::size_t k);
Stencil3 first_derivative_stencil(std::span<const double> x, std::size_t k);

} // namespace bsde
