#include "bsde/malliavin.hpp"

#include <cmath>

#include "bsde/errors.hpp"
#include "bsde/levy.hpp"

namespace bsde {

double difference_derivative(const std::function<double(const PathSegment&)>& xi,
                             std::span<const double> path_values, const TimeGrid& grid,
                             double r, double v) {
    if (v == 0.0)
        throw DomainError("the v = 0 direction is not a difference operator");
    const auto shifted = shift_values(path_values, grid, r, v);
    const PathSegment base{grid.nodes(), path_values};
    const PathSegment moved{grid.nodes(), shifted};
    return xi(moved) - xi(base);
}

DiscreteSolution solve_derivative_bsde(const GeneratorSpec& spec,
                                       const DiscreteSolution& base,
                                       const TerminalSpec& terminal,
                                       MalliavinDirection direction,
                                       std::shared_ptr<const PathBundle> bundle,
                                       std::span<const JumpAtom> atoms,
                                       const RegressionBasis& basis, double tol,
                                       unsigned max_iter) {
    if (!bundle)
        throw ConfigurationError("derivative solve needs a path bundle");
    if (base.kind != SolutionKind::Paths)
        throw ConfigurationError("derivative solve needs a path-based base solution");
    if (!(base.grid == bundle->grid) || base.n_cols() != bundle->n_paths)
        throw ConfigurationError("base solution does not match the bundle");

    const TimeGrid& grid = bundle->grid;
    const std::size_t n_paths = bundle->n_paths;
    const double r = direction.r;
    const double v = direction.v;
    const std::size_t first_node = grid.first_node_at_or_after(r);

    // Terminal derivative per path.
    std::vector<double> terminal_deriv(n_paths);
    if (v == 0.0) {
        if (!terminal.d_xi_0)
            throw ConfigurationError(
                "Brownian direction needs terminal.d_xi_0 (the derivative of xi)");
        for (std::size_t p = 0; p < n_paths; ++p) {
            const PathSegment full{grid.nodes(), bundle->path(p)};
            terminal_deriv[p] = terminal.d_xi_0(full, r);
        }
    } else {
        for (std::size_t p = 0; p < n_paths; ++p)
            terminal_deriv[p] =
                difference_derivative(terminal.xi, bundle->path(p), grid, r, v);
    }

    auto dmf = spec.d_malliavin_f; // zero when absent

    PathDriverFn driver;
    if (v == 0.0) {
        if (!spec.f)
            throw ConfigurationError(
                "Brownian-direction derivative needs the structured driver form");
        driver = [&spec, &base, &grid, bundle, atoms, dmf, r, v](
                     std::size_t i, std::size_t p, double y, double z,
                     std::span<const double> u) {
            const double t = grid[i];
            const PathSegment seg{{grid.nodes().data(), i + 1},
                                  bundle->path(p).subspan(0, i + 1)};
            const double G_base = eval_G(spec, t, base.U.slice(i, p), atoms);
            const double Yb = base.Y(i, p), Zb = base.Z(i, p);
            double jump_term = 0.0;
            for (std::size_t j = 0; j < atoms.size(); ++j)
                jump_term += spec.dg_at(t, base.U(i, p, j)) * u[j] *
                             kappa(atoms[j].mark) * atoms[j].intensity;
            double value = spec.dy(seg, t, Yb, Zb, G_base) * y +
                           spec.dz(seg, t, Yb, Zb, G_base) * z +
                           spec.du(seg, t, Yb, Zb, G_base) * jump_term;
            if (dmf)
                value += dmf(r, v, seg, t, Yb, Zb, G_base);
            return value;
        };
    } else {
        // Shifted path values are materialized once.
        auto shifted = std::make_shared<PathBundle>(shifted_bundle(*bundle, r, v));
        driver = [&spec, &base, &grid, bundle, shifted, atoms, dmf, r, v](
                     std::size_t i, std::size_t p, double y, double z,
                     std::span<const double> u) {
            const double t = grid[i];
            const PathSegment shifted_seg{{grid.nodes().data(), i + 1},
                                          shifted->path(p).subspan(0, i + 1)};
            const double Yb = base.Y(i, p), Zb = base.Z(i, p);
            const auto Ub = base.U.slice(i, p);
            std::vector<double> u_sum(atoms.size());
            for (std::size_t j = 0; j < atoms.size(); ++j)
                u_sum[j] = Ub[j] + u[j];
            double value = spec.eval(shifted_seg, t, Yb + y, Zb + z, u_sum, atoms) -
                           spec.eval(shifted_seg, t, Yb, Zb, Ub, atoms);
            if (dmf) {
                const PathSegment seg{{grid.nodes().data(), i + 1},
                                      bundle->path(p).subspan(0, i + 1)};
                value += dmf(r, v, seg, t, Yb, Zb, eval_G(spec, t, Ub, atoms));
            }
            return value;
        };
    }

    return solve_path_bsde(driver, terminal_deriv, bundle, atoms, basis, tol, max_iter,
                           first_node);
}

IdentificationReport identify_ZU(const GeneratorSpec& spec, const TerminalSpec& terminal,
                                 const DiscreteSolution& base,
                                 std::shared_ptr<const PathBundle> bundle,
                                 std::span<const JumpAtom> atoms,
                                 std::span<const std::size_t> node_indices,
                                 const RegressionBasis& basis, double tol,
                                 unsigned max_iter, bool include_brownian) {
    if (!bundle)
        throw ConfigurationError("identification needs a path bundle");
    const TimeGrid& grid = bundle->grid;
    const std::size_t n_paths = bundle->n_paths;

    IdentificationReport report;
    report.u_errors.assign(atoms.size(), 0.0);
    std::vector<double> u_sq(atoms.size(), 0.0);
    double z_sq = 0.0;
    std::size_t count = 0;

    std::vector<double> prev_state(n_paths), diag(n_paths);

    for (std::size_t i : node_indices) {
        if (i == 0 || i + 1 >= grid.size())
            throw ConfigurationError("diagonal nodes must be interior grid nodes");
        report.nodes.push_back(i);
        const double r = grid[i];
        for (std::size_t p = 0; p < n_paths; ++p)
            prev_state[p] = bundle->value(p, i - 1);

        // E[. | F_{r-}] by regression on the previous node's state.
        auto project = [&](const DiscreteSolution& deriv) {
            for (std::size_t p = 0; p < n_paths; ++p)
                diag[p] = deriv.Y(i, p);
            return regress_fitted(prev_state, diag, basis.degree);
        };

        if (include_brownian) {
            const auto deriv = solve_derivative_bsde(spec, base, terminal, {r, 0.0},
                                                     bundle, atoms, basis, tol, max_iter);
            const auto projected = project(deriv);
            for (std::size_t p = 0; p < n_paths; ++p) {
                const double d = projected[p] - base.Z(i, p);
                z_sq += d * d;
            }
        }
        for (std::size_t j = 0; j < atoms.size(); ++j) {
            const auto deriv =
                solve_derivative_bsde(spec, base, terminal, {r, atoms[j].mark}, bundle,
                                      atoms, basis, tol, max_iter);
            const auto projected = project(deriv);
            for (std::size_t p = 0; p < n_paths; ++p) {
                const double d = projected[p] - base.U(i, p, j);
                u_sq[j] += d * d;
            }
        }
        count += n_paths;
    }

    if (count > 0) {
        if (include_brownian)
            report.z_error = std::sqrt(z_sq / static_cast<double>(count));
        for (std::size_t j = 0; j < atoms.size(); ++j)
            report.u_errors[j] = std::sqrt(u_sq[j] / static_cast<double>(count));
    }
    return report;
}

} // namespace bsde
