#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>

#include "bsde/levy.hpp"
#include "bsde/time_grid.hpp"

namespace bsde {

// View of a sampled path up to the evaluation time.  For Markov-state
// evaluations the segment holds the single current node.
struct PathSegment {
    std::span<const double> times;
    std::span<const double> values;

    double current() const { return values.back(); }
};

using DriverFn =
    std::function<double(const PathSegment&, double t, double y, double z, double u_agg)>;

// Structured driver f(path, t, y, z, G(t,u)) together with the jump
// aggregation g and the coefficient data used for bounds and truncation.
//
// When custom_eval is set it replaces the structured composition entirely
// (used by the cutoff generators that aggregate u twice).
struct GeneratorSpec {
    DriverFn f;
    std::function<double(double t, double u)> g;   // g(t,0) = 0
    std::function<double(double t, double u)> dg;  // d/du g
    std::function<double(double)> a;               // Lipschitz-in-y coefficient
    std::function<double(double)> b;               // z/u coefficient weight
    std::function<double(double)> k_f;             // bound on |f(.,t,0,0,0)|
    std::function<double(double)> rho;             // local Lipschitz modulus
    std::function<double(double t, double mark)> p; // Malliavin bound envelope, mark 0 allowed

    // Optional closed-form partial derivatives; finite differences otherwise.
    DriverFn df_y, df_z, df_u;
    // Optional Malliavin derivative of the driver itself, (r, v, path, t, y, z, u_agg).
    // Zero when absent (deterministic coefficients).
    std::function<double(double r, double v, const PathSegment&, double t, double y,
                         double z, double u_agg)>
        d_malliavin_f;

    std::function<double(const PathSegment&, double t, double y, double z,
                         std::span<const double> u_per_atom,
                         std::span<const JumpAtom> atoms)>
        custom_eval;

    // Driver value for per-atom u values (aggregates through g unless
    // custom_eval is set).
    double eval(const PathSegment& path, double t, double y, double z,
                std::span<const double> u_per_atom, std::span<const JumpAtom> atoms) const;

    // Structured form only: f at an already-aggregated jump argument.
    double eval_agg(const PathSegment& path, double t, double y, double z,
                    double u_agg) const;

    double dy(const PathSegment&, double t, double y, double z, double u_agg) const;
    double dz(const PathSegment&, double t, double y, double z, double u_agg) const;
    double du(const PathSegment&, double t, double y, double z, double u_agg) const;
    double dg_at(double t, double u) const; // closed form or finite difference
};

// Terminal condition and its declared bounds.
struct TerminalSpec {
    std::function<double(const PathSegment&)> xi;
    double A_xi = 0.0;
    std::function<double(double)> A_Dxi;  // mark-or-zero -> bound
    // Optional Brownian-direction derivative of xi, (full path, r).
    std::function<double(const PathSegment&, double r)> d_xi_0;
};

// Constants of the a-priori bounds together with the time-dependent
// envelopes they come from.
struct BoundCertificate {
    double R = 0.0, Q = 0.0, P = 0.0;
    std::function<double(double)> y_envelope;
    std::function<double(double)> z_envelope;
    std::function<double(double, double)> u_envelope; // (t, mark)
};

// Sum of g(t, U(x_j)) * kappa(x_j) * lambda_j over the atoms.
double eval_G(const GeneratorSpec& spec, double t,
              const std::function<double(double)>& U, std::span<const JumpAtom> atoms);
double eval_G(const GeneratorSpec& spec, double t, std::span<const double> u_per_atom,
              std::span<const JumpAtom> atoms);

// Smooth monotone clamp: identity on [-(M-1), M-1], +-M outside +-(M+1),
// C^1 cubic blend in between with derivative in [0,1].  Requires M >= 1.
double smooth_clamp(double x, double M);
double smooth_clamp_deriv(double x, double M);

BoundCertificate compute_bounds(const GeneratorSpec& spec, const TerminalSpec& terminal,
                                std::span<const JumpAtom> atoms, double T);

// Globally Lipschitz driver obtained by clamping (y, z, u) into the
// certificate box.  The structured form clamps y at R, z at Q, each u value
// at 2R and the aggregated jump argument at P.
GeneratorSpec truncate_generator(const GeneratorSpec& spec, const BoundCertificate& cert,
                                 std::span<const JumpAtom> atoms);

// z/u Lipschitz constant factor of the truncated driver (times b(t)).
double truncated_zu_lipschitz(const GeneratorSpec& spec, const BoundCertificate& cert,
                              std::span<const JumpAtom> atoms);

struct Range {
    double lo = 0.0, hi = 0.0;
};

struct SampleBox {
    Range t, y, z, u, u_prime;
};

struct ComparisonConditionReport {
    bool ok = false;
    double worst_violation = 0.0; // min of (df_u * dg + 1) over the sample
    struct Witness {
        double t, y, z, u, u_prime;
    } witness{};
};

// Samples the jump-direction comparison condition on a lattice plus random
// points; ok iff the sampled minimum of (df_u * dg + 1) stays above -1e-9.
ComparisonConditionReport check_comparison_condition(const GeneratorSpec& spec,
                                                     const SampleBox& box,
                                                     unsigned lattice_points = 7,
                                                     unsigned random_points = 200,
                                                     std::uint64_t seed = 0x5eedULL);

// Built-in families.
GeneratorSpec make_zero_generator();
// f = alpha*y + beta*z + gamma_u*u + delta
GeneratorSpec make_linear_generator(double alpha, double beta, double gamma_u, double delta);
// f = c * z * tanh(z), rho(r) = 2c(1+r)
GeneratorSpec make_subquadratic_z_generator(double c);
// driver k_f(t) + a(t)|y|, the upper comparison envelope
GeneratorSpec make_envelope_generator(std::function<double(double)> a,
                                      std::function<double(double)> k_f);

TerminalSpec make_constant_terminal(double c);
// xi = X_T.  Unbounded, so A_xi must be declared by the caller when a
// certificate is needed.
TerminalSpec make_terminal_value(double sigma,
                                 double declared_A_xi = std::numeric_limits<double>::infinity());
// xi = tanh(scale * X_T)
TerminalSpec make_tanh_terminal(double scale, double sigma);

} // namespace bsde
