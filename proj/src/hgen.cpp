#include "bsde/hgen.hpp"

#include <cmath>
#include <optional>

#include "bsde/errors.hpp"

namespace bsde {

double H_alpha(double u, double alpha) {
    if (!(alpha > 0.0))
        throw DomainError("H_alpha requires alpha > 0");
    const double x = alpha * u;
    if (std::fabs(x) < 1e-4) {
        // e^x - x - 1 = x^2/2 (1 + x/3 + x^2/12 + x^3/60 + ...)
        return 0.5 * alpha * u * u * (1.0 + x / 3.0 + x * x / 12.0 + x * x * x / 60.0);
    }
    return (std::exp(x) - x - 1.0) / alpha;
}

double dH_alpha(double u, double alpha) {
    if (!(alpha > 0.0))
        throw DomainError("H_alpha requires alpha > 0");
    return std::expm1(alpha * u);
}

HGeneratorSpec make_exponential_utility_hspec(GeneratorSpec base, double alpha) {
    if (!(alpha > 0.0))
        throw ConfigurationError("exponential-utility family requires alpha > 0");
    HGeneratorSpec h;
    h.base = std::move(base);
    h.H = [alpha](double u) { return H_alpha(u, alpha); };
    h.dH = [alpha](double u) { return dH_alpha(u, alpha); };
    h.phi = [](double v, double w) { return v + w; };
    h.dphi_v = [](double, double) { return 1.0; };
    h.dphi_w = [](double, double) { return 1.0; };
    // |H'(u)| = |e^{au} - 1| <= (e^{aR} - 1)/R * |u| on |u| <= R.
    h.c_of = [alpha](double radius) {
        if (radius <= 0.0)
            return alpha;
        return std::expm1(alpha * radius) / radius;
    };
    return h;
}

GeneratorSpec build_cutoff_generator(const HGeneratorSpec& hspec, unsigned n,
                                     std::span<const JumpAtom> atoms) {
    if (n == 0)
        throw ConfigurationError("cutoff index n must be >= 1");
    (void)atoms; // aggregation runs over the atoms the solver passes in

    GeneratorSpec out = hspec.base; // coefficient data carries over unchanged
    auto base = std::make_shared<GeneratorSpec>(hspec.base);
    auto H = hspec.H;
    auto phi = hspec.phi;
    out.f = nullptr;
    out.df_y = out.df_z = out.df_u = nullptr;
    out.custom_eval = [base, H, phi, n](const PathSegment& path, double t, double y,
                                        double z, std::span<const double> u,
                                        std::span<const JumpAtom> atom_list) {
        const double g_agg = eval_G(*base, t, u, atom_list);
        double h_agg = 0.0;
        for (std::size_t j = 0; j < atom_list.size(); ++j)
            h_agg += H(u[j]) * kappa_n(atom_list[j].mark, n) * atom_list[j].intensity;
        return phi(base->f(path, t, y, z, g_agg), h_agg);
    };
    return out;
}

namespace {

struct SolutionNorms {
    double dY, dZ, dU;
};

SolutionNorms diff_norms(const DiscreteSolution& a, const DiscreteSolution& b,
                         std::span<const JumpAtom> atoms) {
    const std::size_t n_nodes = a.grid.size();
    const std::size_t n_paths = a.n_cols();
    const std::size_t n_atoms = atoms.size();
    double sup_sq = 0.0, z_sq = 0.0, u_sq = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) {
        double sup = 0.0;
        for (std::size_t i = 0; i < n_nodes; ++i)
            sup = std::max(sup, std::fabs(a.Y(i, p) - b.Y(i, p)));
        sup_sq += sup * sup;
        for (std::size_t i = 0; i + 1 < n_nodes; ++i) {
            const double dt = a.grid.dt(i);
            const double dz = a.Z(i, p) - b.Z(i, p);
            z_sq += dz * dz * dt;
            for (std::size_t j = 0; j < n_atoms; ++j) {
                const double du = a.U(i, p, j) - b.U(i, p, j);
                u_sq += du * du * atoms[j].intensity * dt;
            }
        }
    }
    const double inv_paths = 1.0 / static_cast<double>(n_paths);
    return {std::sqrt(sup_sq * inv_paths), std::sqrt(z_sq * inv_paths),
            std::sqrt(u_sq * inv_paths)};
}

} // namespace

namespace {

HLimitResult run_schedule(const HGeneratorSpec& hspec, const TerminalSpec& terminal,
                          std::span<const JumpAtom> atoms, double horizon,
                          const HLimitSettings& settings,
                          const std::function<DiscreteSolution(const GeneratorSpec&)>& solve_one) {
    if (settings.schedule.empty())
        throw ConfigurationError("hlimit schedule must not be empty");
    for (std::size_t k = 0; k + 1 < settings.schedule.size(); ++k)
        if (!(settings.schedule[k] < settings.schedule[k + 1]))
            throw ConfigurationError("hlimit schedule must be strictly increasing");

    HLimitResult result;
    result.certificate = compute_bounds(hspec.base, terminal, atoms, horizon);

    std::optional<DiscreteSolution> prev;
    unsigned prev_n = 0;

    for (unsigned n : settings.schedule) {
        GeneratorSpec spec_n = build_cutoff_generator(hspec, n, atoms);
        if (settings.truncate)
            spec_n = truncate_generator(spec_n, result.certificate, atoms);
        DiscreteSolution sol = solve_one(spec_n);
        if (prev) {
            const auto norms = diff_norms(sol, *prev, atoms);
            result.table.push_back({prev_n, n, norms.dY, norms.dZ, norms.dU});
            if (result.table.back().total() < settings.cauchy_tol) {
                result.solution = std::move(sol);
                result.converged = true;
                return result;
            }
        }
        prev = std::move(sol);
        prev_n = n;
    }
    result.solution = std::move(*prev);
    result.converged = false;
    result.solution.diagnostics.converged = false;
    result.solution.diagnostics.notes.push_back(
        "cutoff schedule exhausted before the Cauchy tolerance");
    return result;
}

} // namespace

HLimitResult solve_H_limit(const HGeneratorSpec& hspec, const TerminalSpec& terminal,
                           const LevyTriplet& model, std::span<const JumpAtom> atoms,
                           std::shared_ptr<const PathBundle> bundle,
                           const HLimitSettings& settings) {
    if (atoms.size() != model.atoms().size())
        throw ConfigurationError("hlimit atoms must match the model's jump measure");
    for (std::size_t j = 0; j < atoms.size(); ++j)
        if (atoms[j] != model.atoms()[j])
            throw ConfigurationError("hlimit atoms must match the model's jump measure");
    return run_schedule(hspec, terminal, atoms, bundle->grid.horizon(), settings,
                        [&](const GeneratorSpec& spec_n) {
                            return solve_picard_regression(model, spec_n, terminal, bundle,
                                                           settings.basis,
                                                           settings.solver_tol,
                                                           settings.max_iter);
                        });
}

HLimitResult solve_H_limit_dp(const HGeneratorSpec& hspec, const TerminalSpec& terminal,
                              const std::function<double(double)>& terminal_fn,
                              const ForwardSpec& forward, std::span<const JumpAtom> atoms,
                              std::vector<double> state_lattice, const TimeGrid& tgrid,
                              const HLimitSettings& settings,
                              const MarkovDpSettings& dp_settings) {
    return run_schedule(hspec, terminal, atoms, tgrid.horizon(), settings,
                        [&](const GeneratorSpec& spec_n) {
                            return solve_markov_dp(forward, spec_n, terminal_fn, atoms,
                                                   state_lattice, tgrid, dp_settings);
                        });
}

} // namespace bsde
