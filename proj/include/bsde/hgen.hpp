#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "bsde/generator.hpp"
#include "bsde/solver.hpp"

namespace bsde {

// Driver of the composed form  phi(fbar(t, y, z, G(t,u)), integral of H(u))
// where fbar is a structured generator and H carries no kappa weight.
struct HGeneratorSpec {
    GeneratorSpec base; // fbar
    std::function<double(double)> H;    // H(0) = 0
    std::function<double(double)> dH;
    std::function<double(double, double)> phi;     // (v, w)
    std::function<double(double, double)> dphi_v;
    std::function<double(double, double)> dphi_w;
    std::function<double(double)> c_of; // radius -> bound constant on |H'(u)|/|u|
};

// (e^{alpha u} - alpha u - 1) / alpha; series near 0 to avoid cancellation.
double H_alpha(double u, double alpha);
double dH_alpha(double u, double alpha); // e^{alpha u} - 1

// hspec with H = H_alpha, phi(v, w) = v + w on the given base driver.
HGeneratorSpec make_exponential_utility_hspec(GeneratorSpec base, double alpha);

// Driver f^n with the H integrand damped by kappa_n; reuses the base
// coefficient data so the bound certificate is independent of n.
GeneratorSpec build_cutoff_generator(const HGeneratorSpec& hspec, unsigned n,
                                     std::span<const JumpAtom> atoms);

struct HLimitSettings {
    std::vector<unsigned> schedule = {1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
    double cauchy_tol = 1e-4;
    RegressionBasis basis;
    double solver_tol = 1e-8;
    unsigned max_iter = 50;
    bool truncate = true; // clamp each f^n into the base certificate box
};

struct HLimitRow {
    unsigned n = 0, m = 0;
    double dY = 0.0, dZ = 0.0, dU = 0.0;

    double total() const { return dY + dZ + dU; }
};

struct HLimitResult {
    DiscreteSolution solution;
    std::vector<HLimitRow> table;
    bool converged = false;
    BoundCertificate certificate;
};

// Solves the BSDE for each n in the schedule on shared randomness and stops
// once consecutive iterates are Cauchy within cauchy_tol.
HLimitResult solve_H_limit(const HGeneratorSpec& hspec, const TerminalSpec& terminal,
                           const LevyTriplet& model, std::span<const JumpAtom> atoms,
                           std::shared_ptr<const PathBundle> bundle,
                           const HLimitSettings& settings);

// Same schedule driven through the lattice solver (values stay inside the
// comparison envelopes, which polynomial regression estimates do not
// guarantee pointwise).  The norms average over lattice states instead of
// paths.
HLimitResult solve_H_limit_dp(const HGeneratorSpec& hspec, const TerminalSpec& terminal,
                              const std::function<double(double)>& terminal_fn,
                              const ForwardSpec& forward, std::span<const JumpAtom> atoms,
                              std::vector<double> state_lattice, const TimeGrid& tgrid,
                              const HLimitSettings& settings,
                              const MarkovDpSettings& dp_settings = {});

} // namespace bsde
