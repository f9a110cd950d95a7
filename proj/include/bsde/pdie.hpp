#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bsde/array.hpp"
#include "bsde/generator.hpp"
#include "bsde/solver.hpp"
#include "bsde/time_grid.hpp"

namespace bsde {

// Space-time lattice carrying the value function u(t, v).
struct PdieGrid {
    std::vector<double> space_nodes;
    TimeGrid tgrid;
    Array2 values; // (time node, space node)
};

// Diffusion-drift part: sigma^2/2 u'' + b u' by 3-point differences,
// one-sided at the boundaries.
std::vector<double> apply_A(std::span<const double> phi, const ForwardSpec& forward,
                            std::span<const double> space_nodes);

struct JumpOpResult {
    std::vector<double> values;
    std::size_t clipped = 0; // off-grid jump targets clipped to the ends
};

// Integral operator with compensator: sum over atoms of
// [phi(v + beta) - phi(v) - beta phi'(v)] lambda.
JumpOpResult apply_K(std::span<const double> phi, const ForwardSpec& forward,
                     std::span<const JumpAtom> atoms, std::span<const double> space_nodes);

// Kappa-weighted shift operator: sum of [phi(v + beta) - phi(v)] kappa lambda.
JumpOpResult apply_B(std::span<const double> phi, const ForwardSpec& forward,
                     std::span<const JumpAtom> atoms, std::span<const double> space_nodes);

// Backward IMEX stepping: diffusion implicit, jumps and the nonlinearity
// explicit with the previous slice.  Refuses time steps that violate the
// explicit-part stability bound.
PdieGrid solve_pdie(const ForwardSpec& forward, const GeneratorSpec& spec,
                    const std::function<double(double)>& g_terminal,
                    std::vector<double> space_nodes, const TimeGrid& tgrid,
                    std::span<const JumpAtom> atoms);

struct CrossValidationReport {
    double sup_error = 0.0;
    double inner_sup_error = 0.0; // middle half of the space nodes only
    double l2_error = 0.0;
    std::vector<double> times;        // compared time nodes
    std::vector<double> per_time_sup; // sup error per compared time
};

// Compares the PDIE surface against a lattice BSDE value function on shared
// nodes.
CrossValidationReport cross_validate(const PdieGrid& pgrid, const DiscreteSolution& fbsde);

struct ForwardConditionsReport {
    struct Item {
        std::string name;
        bool ok = true;
        double value = 0.0; // worst sampled value for this condition
        double witness_psi = 0.0;
        double witness_x = 0.0;
    };
    std::vector<Item> items;
    bool all_ok = true;
};

// Samples the sufficient conditions for bounded forward Malliavin
// derivatives on a (psi, mark) box.
ForwardConditionsReport check_forward_conditions(const ForwardSpec& forward, Range psi_box,
                                                 Range mark_box,
                                                 std::span<const JumpAtom> atoms,
                                                 unsigned samples_per_axis = 41);

} // namespace bsde
