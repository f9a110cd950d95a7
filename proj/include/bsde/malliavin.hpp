#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "bsde/generator.hpp"
#include "bsde/solver.hpp"

namespace bsde {

// Jump-direction Malliavin derivative of a path functional:
// xi(path + v 1_{[r,T]}) - xi(path).  v must be nonzero.
double difference_derivative(const std::function<double(const PathSegment&)>& xi,
                             std::span<const double> path_values, const TimeGrid& grid,
                             double r, double v);

struct MalliavinDirection {
    double r = 0.0;
    double v = 0.0; // 0 selects the Brownian direction
};

// Solves the affine BSDE for (DY, DZ, DU) in the given direction around a
// converged base solution on the same bundle.  The solution is zero on
// nodes before r.
DiscreteSolution solve_derivative_bsde(const GeneratorSpec& spec,
                                       const DiscreteSolution& base,
                                       const TerminalSpec& terminal,
                                       MalliavinDirection direction,
                                       std::shared_ptr<const PathBundle> bundle,
                                       std::span<const JumpAtom> atoms,
                                       const RegressionBasis& basis, double tol,
                                       unsigned max_iter);

struct IdentificationReport {
    double z_error = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> u_errors;     // per atom
    std::vector<std::size_t> nodes;   // diagonal nodes used
};

// Compares E[D_{r,v} Y_r | previous node] on the diagonal r = t_i against
// the stored Z (v = 0) and U (v = x_j) of the base solution; reports
// empirical L2 discrepancies.
IdentificationReport identify_ZU(const GeneratorSpec& spec, const TerminalSpec& terminal,
                                 const DiscreteSolution& base,
                                 std::shared_ptr<const PathBundle> bundle,
                                 std::span<const JumpAtom> atoms,
                                 std::span<const std::size_t> node_indices,
                                 const RegressionBasis& basis, double tol,
                                 unsigned max_iter, bool include_brownian = true);

} // namespace bsde
