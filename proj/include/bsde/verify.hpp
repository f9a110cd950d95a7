#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "bsde/generator.hpp"
#include "bsde/solver.hpp"

namespace bsde {

struct Excursion {
    double amount = -std::numeric_limits<double>::infinity(); // |value| - allowed
    double t = 0.0;
    std::size_t node = 0;
    std::size_t col = 0;
    std::size_t atom = 0;
};

struct BoundsCheckReport {
    bool y_ok = true, z_ok = true, u_ok = true;
    Excursion worst_y, worst_z, worst_u;

    bool ok() const { return y_ok && z_ok && u_ok; }
};

// Pointwise envelope check at every stored value.  The jump envelope is
// capped at 2R - 2.
BoundsCheckReport check_bounds(const DiscreteSolution& sol, const BoundCertificate& cert,
                               double slack);

struct ComparisonReport {
    bool ok = true;
    double worst_gap = 0.0; // max of Y - Y'
    double t = 0.0;
    std::size_t node = 0;
    std::size_t col = 0;
};

// ok iff Y <= Y' + tol at every stored point; both solutions must share the
// same discretization.
ComparisonReport check_comparison(const DiscreteSolution& sol,
                                  const DiscreteSolution& sol_prime, double tol);

// Upper and lower comparison trajectories: (closed_form_linear, its negative).
std::pair<std::vector<double>, std::vector<double>>
sandwich_envelopes(const GeneratorSpec& spec, const TerminalSpec& terminal,
                   const BoundCertificate& cert, const TimeGrid& grid);

std::string bounds_report_json(const BoundsCheckReport& report);
std::string comparison_report_json(const ComparisonReport& report);

} // namespace bsde
