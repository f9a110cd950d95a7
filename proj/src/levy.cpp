#include "bsde/levy.hpp"

#include <cmath>

#include "bsde/errors.hpp"
#include "bsde/quadrature.hpp"
#include "bsde/rng.hpp"

namespace bsde {

LevyTriplet::LevyTriplet(double gamma, double sigma, std::vector<JumpAtom> atoms)
    : gamma_(gamma), sigma_(sigma), atoms_(std::move(atoms)) {
    if (!std::isfinite(gamma_))
        throw ConfigurationError("model.gamma must be finite");
    if (!(sigma_ >= 0.0) || !std::isfinite(sigma_))
        throw ConfigurationError("model.sigma must be nonnegative and finite");
    double total = 0.0;
    for (std::size_t j = 0; j < atoms_.size(); ++j) {
        const auto& a = atoms_[j];
        if (a.mark == 0.0 || !std::isfinite(a.mark))
            throw ConfigurationError("model.atoms: marks must be nonzero and finite");
        if (!(a.intensity > 0.0) || !std::isfinite(a.intensity))
            throw ConfigurationError("model.atoms: intensity must be positive and finite");
        if (j > 0 && !(atoms_[j - 1].mark < a.mark))
            throw ConfigurationError("model.atoms: marks must be strictly increasing");
        total += a.intensity;
    }
    if (!std::isfinite(total))
        throw ConfigurationError("model.atoms: total intensity must be finite");
}

double LevyTriplet::total_intensity() const {
    double total = 0.0;
    for (const auto& a : atoms_)
        total += a.intensity;
    return total;
}

double LevyTriplet::variance_rate() const {
    double v = sigma_ * sigma_;
    for (const auto& a : atoms_)
        v += a.intensity * a.mark * a.mark;
    return v;
}

PathBundle sample_paths(const LevyTriplet& model, const TimeGrid& grid,
                        std::size_t n_paths, std::uint64_t seed) {
    if (n_paths == 0)
        throw ConfigurationError("n_paths must be >= 1");

    const std::size_t n_steps = grid.steps();
    const std::size_t n_nodes = grid.size();
    const auto atoms = model.atoms();

    PathBundle bundle{grid, n_paths, seed, atoms.size(),
                      std::vector<double>(n_paths * n_steps),
                      std::vector<std::uint32_t>(n_paths * n_steps * atoms.size()),
                      std::vector<double>(n_paths * n_nodes)};

    for (std::size_t p = 0; p < n_paths; ++p) {
        CounterRng rng(seed, p);
        double x = 0.0;
        bundle.values[p * n_nodes] = 0.0;
        for (std::size_t i = 0; i < n_steps; ++i) {
            const double dt = grid.dt(i);
            const double dw = std::sqrt(dt) * rng.next_normal();
            bundle.brownian_increments[p * n_steps + i] = dw;
            double dx = model.gamma() * dt + model.sigma() * dw;
            for (std::size_t j = 0; j < atoms.size(); ++j) {
                const std::uint32_t c = rng.next_poisson(atoms[j].intensity * dt);
                bundle.jump_counts[(p * n_steps + i) * atoms.size() + j] = c;
                dx += atoms[j].mark * (static_cast<double>(c) - atoms[j].intensity * dt);
            }
            x += dx;
            bundle.values[p * n_nodes + i + 1] = x;
        }
    }
    return bundle;
}

std::vector<double> shift_values(std::span<const double> values, const TimeGrid& grid,
                                 double r, double v) {
    if (values.size() != grid.size())
        throw ConfigurationError("path values do not match the grid");
    const std::size_t from = grid.first_node_at_or_after(r); // throws for r outside [0,T]
    std::vector<double> out(values.begin(), values.end());
    for (std::size_t i = from; i < out.size(); ++i)
        out[i] += v;
    return out;
}

std::vector<double> shift_path(const PathBundle& bundle, std::size_t path_index,
                               double r, double v) {
    if (path_index >= bundle.n_paths)
        throw DomainError("path index out of range");
    return shift_values(bundle.path(path_index), bundle.grid, r, v);
}

PathBundle shifted_bundle(const PathBundle& bundle, double r, double v) {
    PathBundle out = bundle;
    const std::size_t from = bundle.grid.first_node_at_or_after(r);
    const std::size_t n_nodes = bundle.grid.size();
    for (std::size_t p = 0; p < bundle.n_paths; ++p)
        for (std::size_t i = from; i < n_nodes; ++i)
            out.values[p * n_nodes + i] += v;
    return out;
}

double kappa(double x) {
    return std::min(1.0, std::fabs(x));
}

double kappa_n(double x, unsigned n) {
    return std::min(1.0, static_cast<double>(n) * std::fabs(x));
}

double l2_nu_norm(const std::function<double(double)>& h, std::span<const JumpAtom> atoms) {
    double s = 0.0;
    for (const auto& a : atoms) {
        const double hv = h(a.mark);
        s += hv * hv * a.intensity;
    }
    return std::sqrt(s);
}

double kappa_l2_norm(std::span<const JumpAtom> atoms) {
    return l2_nu_norm([](double x) { return kappa(x); }, atoms);
}

DiscretizedMeasure discretize_density(const std::function<double(double)>& density,
                                      double lo, double hi, std::size_t n_atoms,
                                      double small_jump_cutoff) {
    if (!(lo < hi))
        throw ConfigurationError("density support must be a nonempty interval");
    if (lo <= 0.0 && hi >= 0.0)
        throw ConfigurationError("density support must exclude 0");
    if (!(small_jump_cutoff > 0.0))
        throw ConfigurationError("small jump cutoff must be positive");
    if (n_atoms == 0)
        throw ConfigurationError("n_atoms must be >= 1");

    DiscretizedMeasure out;

    // Mass removed inside the cutoff, measured as integral of x^2 * density.
    double trim_lo = lo, trim_hi = hi;
    if (hi > 0.0) {
        trim_lo = std::max(lo, small_jump_cutoff);
    } else {
        trim_hi = std::min(hi, -small_jump_cutoff);
    }
    auto integrate_cfg = [&](const std::function<double(double)>& f, double a, double b) {
        try {
            return integrate(f, a, b, 1e-10, 1e-14);
        } catch (const ConfigurationError&) {
            throw ConfigurationError("density is not integrable on the requested support");
        }
    };
    if (trim_lo > lo)
        out.truncated_mass = integrate_cfg(
            [&](double x) { return x * x * density(x); }, lo, std::min(trim_lo, hi));
    if (trim_hi < hi)
        out.truncated_mass += integrate_cfg(
            [&](double x) { return x * x * density(x); }, std::max(trim_hi, lo), hi);
    if (!(trim_lo < trim_hi))
        return out; // everything inside the cutoff

    const double width = (trim_hi - trim_lo) / static_cast<double>(n_atoms);
    for (std::size_t k = 0; k < n_atoms; ++k) {
        const double a = trim_lo + width * static_cast<double>(k);
        const double b = (k + 1 == n_atoms) ? trim_hi : a + width;
        const double mid = 0.5 * (a + b);
        const double mass = integrate_cfg(density, a, b);
        if (mass < 0.0)
            throw ConfigurationError("density must be nonnegative on its support");
        if (mass > 0.0)
            out.atoms.push_back({mid, mass});
    }
    double total = 0.0;
    for (const auto& a : out.atoms)
        total += a.intensity;
    if (!std::isfinite(total))
        throw ConfigurationError("discretized measure has non-finite total intensity");
    return out;
}

} // namespace bsde
