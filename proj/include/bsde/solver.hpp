#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bsde/array.hpp"
#include "bsde/generator.hpp"
#include "bsde/levy.hpp"
#include "bsde/time_grid.hpp"

namespace bsde {

// Coefficients of the forward SDE  dPsi = b ds + sigma dW + beta dN~.
struct ForwardSpec {
    std::function<double(double)> b_coef;
    std::function<double(double)> sigma_coef;
    std::function<double(double, double)> beta; // (state, mark)
    double c_beta = 1.0;                        // declared bound |beta| <= c_beta * kappa
};

// Forward model for the driving process itself: b = gamma, constant sigma,
// beta(v, x) = x.
ForwardSpec forward_from_model(const LevyTriplet& model);

struct SolveDiagnostics {
    bool converged = true;
    std::size_t iterations = 0;
    std::vector<double> residual_history; // successive-iterate norms
    std::size_t ridge_fallbacks = 0;
    std::size_t max_inner_iterations = 0;
    double lattice_escape = 0.0;       // worst per-step clipped transition mass
    bool lattice_escape_warning = false;
    double jump_truncation_error = 0.0; // worst per-step discarded branch mass
    std::vector<std::string> notes;
};

enum class SolutionKind { Lattice, Paths };

// Y, Z per (node, state-or-path) and U per (node, state-or-path, atom).
struct DiscreteSolution {
    TimeGrid grid;
    SolutionKind kind = SolutionKind::Lattice;
    std::vector<double> states;                 // lattice representation
    std::shared_ptr<const PathBundle> bundle;   // path representation
    std::vector<double> atom_marks;
    Array2 Y, Z;
    Array3 U;
    SolveDiagnostics diagnostics;

    std::size_t n_cols() const { return Y.cols(); }
};

struct MarkovDpSettings {
    unsigned gauss_hermite_order = 16;
    unsigned max_jumps_per_atom = 2;
    double fixed_point_tol = 1e-10;
    unsigned max_inner_iterations = 50;
    double escape_warn_threshold = 1e-3;
};

// Backward dynamic programming for Markov forward states.  The Y surface is
// the value function u(t, v); Z = sigma * d_v u by central differences and
// U(t, v, x_j) = u(t, v + beta(v, x_j)) - u(t, v).
DiscreteSolution solve_markov_dp(const ForwardSpec& forward, const GeneratorSpec& spec,
                                 const std::function<double(double)>& terminal_fn,
                                 std::span<const JumpAtom> atoms,
                                 std::vector<double> state_lattice, const TimeGrid& grid,
                                 const MarkovDpSettings& settings = {});

struct RegressionBasis {
    unsigned degree = 3; // polynomials in X_t up to this degree, plus constant
};

// Picard iteration with least-squares regression per time slice.
DiscreteSolution solve_picard_regression(const LevyTriplet& model, const GeneratorSpec& spec,
                                         const TerminalSpec& terminal,
                                         std::shared_ptr<const PathBundle> bundle,
                                         const RegressionBasis& basis, double tol,
                                         unsigned max_iter);

// Shared backward engine: driver evaluated per (node, path) on the current
// iterate.  Rows before first_node are pinned to zero.
using PathDriverFn = std::function<double(std::size_t node, std::size_t path, double y,
                                          double z, std::span<const double> u)>;

DiscreteSolution solve_path_bsde(const PathDriverFn& driver,
                                 std::span<const double> terminal_values,
                                 std::shared_ptr<const PathBundle> bundle,
                                 std::span<const JumpAtom> atoms,
                                 const RegressionBasis& basis, double tol,
                                 unsigned max_iter, std::size_t first_node = 0);

// Least-squares fit of target onto the polynomial basis in the covariate;
// returns fitted values at the design points.
std::vector<double> regress_fitted(std::span<const double> covariate,
                                   std::span<const double> target, unsigned degree,
                                   bool* used_ridge = nullptr);

// Y(t) = A_xi exp(int_t^T a) + int_t^T k_f(s) exp(int_t^s a) ds per node.
std::vector<double> closed_form_linear(double A_xi, const std::function<double(double)>& a,
                                       const std::function<double(double)>& k_f,
                                       const TimeGrid& grid);

} // namespace bsde
