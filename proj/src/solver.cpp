#include "bsde/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "bsde/errors.hpp"
#include "bsde/fdiff.hpp"
#include "bsde/interp.hpp"
#include "bsde/quadrature.hpp"

namespace bsde {

ForwardSpec forward_from_model(const LevyTriplet& model) {
    ForwardSpec fwd;
    const double gamma = model.gamma();
    const double sigma = model.sigma();
    fwd.b_coef = [gamma](double) { return gamma; };
    fwd.sigma_coef = [sigma](double) { return sigma; };
    fwd.beta = [](double, double mark) { return mark; };
    fwd.c_beta = 1.0;
    for (const auto& a : model.atoms())
        fwd.c_beta = std::max(fwd.c_beta, std::fabs(a.mark) / kappa(a.mark));
    return fwd;
}

namespace {

// Per-node polynomial regression.  The Gram matrix is factored once and the
// basis is rebuilt on the fly per fit, so memory stays O(paths).
class NodeRegression {
    std::vector<double> x_;
    double mean_ = 0.0, scale_ = 1.0;
    unsigned degree_;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
    bool ridge_ = false;

    double basis(std::size_t p, unsigned k) const {
        const double u = (x_[p] - mean_) * scale_;
        double v = 1.0;
        for (unsigned i = 0; i < k; ++i)
            v *= u;
        return v;
    }

public:
    NodeRegression(std::span<const double> x, unsigned degree)
        : x_(x.begin(), x.end()), degree_(degree) {
        const std::size_t n = x_.size();
        double m = 0.0;
        for (double v : x_)
            m += v;
        mean_ = m / static_cast<double>(n);
        double s2 = 0.0;
        for (double v : x_)
            s2 += (v - mean_) * (v - mean_);
        const double sd = std::sqrt(s2 / static_cast<double>(n));
        scale_ = (sd > 1e-300) ? 1.0 / sd : 0.0; // degenerate column -> zero basis

        const unsigned p = degree_ + 1;
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
        for (std::size_t i = 0; i < n; ++i) {
            double pow_k = 1.0;
            std::vector<double> row(p);
            const double u = (x_[i] - mean_) * scale_;
            for (unsigned k = 0; k < p; ++k) {
                row[k] = pow_k;
                pow_k *= u;
            }
            for (unsigned a = 0; a < p; ++a)
                for (unsigned b = a; b < p; ++b)
                    gram(a, b) += row[a] * row[b];
        }
        gram /= static_cast<double>(n);
        for (unsigned a = 0; a < p; ++a)
            for (unsigned b = 0; b < a; ++b)
                gram(a, b) = gram(b, a);

        ldlt_.compute(gram);
        bool degenerate = (ldlt_.info() != Eigen::Success);
        if (!degenerate) {
            const auto d = ldlt_.vectorD();
            const double dmax = d.maxCoeff();
            if (!(dmax > 0.0) || d.minCoeff() < 1e-12 * dmax)
                degenerate = true;
        }
        if (degenerate) {
            ridge_ = true;
            // intercept stays unpenalized so constant fits remain exact
            gram.diagonal().tail(p - 1).array() += 1e-8;
            gram(0, 0) += (p == 1) ? 1e-8 : 0.0;
            ldlt_.compute(gram);
        }
    }

    bool used_ridge() const { return ridge_; }

    void fit(std::span<const double> target, std::span<double> fitted) const {
        const std::size_t n = x_.size();
        const unsigned p = degree_ + 1;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
        for (std::size_t i = 0; i < n; ++i) {
            double pow_k = 1.0;
            const double u = (x_[i] - mean_) * scale_;
            for (unsigned k = 0; k < p; ++k) {
                rhs(k) += pow_k * target[i];
                pow_k *= u;
            }
        }
        rhs /= static_cast<double>(n);
        const Eigen::VectorXd coef = ldlt_.solve(rhs);
        for (std::size_t i = 0; i < n; ++i) {
            double v = 0.0, pow_k = 1.0;
            const double u = (x_[i] - mean_) * scale_;
            for (unsigned k = 0; k < p; ++k) {
                v += coef(k) * pow_k;
                pow_k *= u;
            }
            fitted[i] = v;
        }
    }
};

double truncated_poisson_pmf(double mean, unsigned count, unsigned max_count,
                             double* retained) {
    double pmf = std::exp(-mean);
    double total = pmf;
    double value = (count == 0) ? pmf : 0.0;
    for (unsigned k = 1; k <= max_count; ++k) {
        pmf *= mean / static_cast<double>(k);
        total += pmf;
        if (k == count)
            value = pmf;
    }
    if (retained)
        *retained = total;
    return value / total;
}

} // namespace

DiscreteSolution solve_markov_dp(const ForwardSpec& forward, const GeneratorSpec& spec,
                                 const std::function<double(double)>& terminal_fn,
                                 std::span<const JumpAtom> atoms,
                                 std::vector<double> state_lattice, const TimeGrid& grid,
                                 const MarkovDpSettings& settings) {
    const std::size_t m = state_lattice.size();
    if (m < 3)
        throw ConfigurationError("state lattice needs at least 3 nodes");
    for (std::size_t k = 0; k + 1 < m; ++k)
        if (!(state_lattice[k] < state_lattice[k + 1]))
            throw ConfigurationError("state lattice must be strictly increasing");

    const std::size_t n_nodes = grid.size();
    const std::size_t n_atoms = atoms.size();
    const GaussHermiteRule gh = gauss_hermite(settings.gauss_hermite_order);

    DiscreteSolution sol;
    sol.grid = grid;
    sol.kind = SolutionKind::Lattice;
    sol.states = state_lattice;
    for (const auto& a : atoms)
        sol.atom_marks.push_back(a.mark);
    sol.Y = Array2(n_nodes, m);
    sol.Z = Array2(n_nodes, m);
    sol.U = Array3(n_nodes, m, n_atoms);

    const auto& v = sol.states;

    auto fill_zu = [&](std::size_t node, std::span<const double> slice) {
        const MonotoneCubic interp(v, slice);
        const auto grad = lattice_gradient(v, slice);
        for (std::size_t k = 0; k < m; ++k) {
            sol.Z(node, k) = forward.sigma_coef(v[k]) * grad[k];
            for (std::size_t j = 0; j < n_atoms; ++j) {
                const double dest = v[k] + forward.beta(v[k], atoms[j].mark);
                sol.U(node, k, j) = interp(dest) - slice[k];
            }
        }
    };

    for (std::size_t k = 0; k < m; ++k)
        sol.Y(n_nodes - 1, k) = terminal_fn(v[k]);
    fill_zu(n_nodes - 1, sol.Y.row(n_nodes - 1));

    // Jump branch table: counts per atom up to the cap, weights renormalized.
    std::vector<std::vector<unsigned>> branches;
    {
        std::vector<unsigned> idx(n_atoms, 0);
        const unsigned cap = settings.max_jumps_per_atom;
        while (true) {
            branches.push_back(idx);
            std::size_t j = 0;
            while (j < n_atoms && idx[j] == cap) {
                idx[j] = 0;
                ++j;
            }
            if (j == n_atoms)
                break;
            ++idx[j];
        }
        if (n_atoms == 0)
            branches.assign(1, {});
    }

    std::vector<double> u_next(m), u_cur(m), u_new(m), expectation(m);
    std::vector<double> z_slice(m);
    Array2 u_jump(m, std::max<std::size_t>(n_atoms, 1));

    for (std::size_t step = n_nodes - 1; step-- > 0;) {
        const double t = grid[step];
        const double dt = grid.dt(step);
        for (std::size_t k = 0; k < m; ++k)
            u_next[k] = sol.Y(step + 1, k);
        const MonotoneCubic interp_next(v, u_next);

        // Branch probabilities for this step size.
        double retained_total = 1.0;
        std::vector<std::vector<double>> pmf(n_atoms);
        for (std::size_t j = 0; j < n_atoms; ++j) {
            double retained = 1.0;
            pmf[j].resize(settings.max_jumps_per_atom + 1);
            for (unsigned c = 0; c <= settings.max_jumps_per_atom; ++c)
                pmf[j][c] = truncated_poisson_pmf(atoms[j].intensity * dt, c,
                                                  settings.max_jumps_per_atom, &retained);
            retained_total *= retained;
        }
        sol.diagnostics.jump_truncation_error =
            std::max(sol.diagnostics.jump_truncation_error, 1.0 - retained_total);

        double escaped = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double state = v[k];
            double drift = forward.b_coef(state) * dt;
            for (std::size_t j = 0; j < n_atoms; ++j)
                drift -= forward.beta(state, atoms[j].mark) * atoms[j].intensity * dt;
            const double vol = forward.sigma_coef(state) * std::sqrt(dt);
            double acc = 0.0;
            for (const auto& branch : branches) {
                double prob = 1.0, jump = 0.0;
                for (std::size_t j = 0; j < n_atoms; ++j) {
                    prob *= pmf[j][branch[j]];
                    jump += branch[j] * forward.beta(state, atoms[j].mark);
                }
                for (std::size_t q = 0; q < gh.points.size(); ++q) {
                    const double dest = state + drift + vol * gh.points[q] + jump;
                    const double w = prob * gh.weights[q];
                    if (interp_next.clips(dest))
                        escaped += w;
                    acc += w * interp_next(dest);
                }
            }
            expectation[k] = acc;
        }
        escaped /= static_cast<double>(m);
        sol.diagnostics.lattice_escape = std::max(sol.diagnostics.lattice_escape, escaped);

        // Slice fixed point: Z and U are read from the slice being solved.
        u_cur = u_next;
        bool slice_done = false;
        for (unsigned outer = 0; outer < settings.max_inner_iterations && !slice_done;
             ++outer) {
            const MonotoneCubic interp_cur(v, u_cur);
            const auto grad = lattice_gradient(v, u_cur);
            for (std::size_t k = 0; k < m; ++k) {
                z_slice[k] = forward.sigma_coef(v[k]) * grad[k];
                for (std::size_t j = 0; j < n_atoms; ++j)
                    u_jump(k, j) = interp_cur(v[k] + forward.beta(v[k], atoms[j].mark)) -
                                   u_cur[k];
            }
            for (std::size_t k = 0; k < m; ++k) {
                const double state = v[k];
                const PathSegment seg{{&t, 1}, {&state, 1}};
                double y = u_cur[k];
                double prev_delta = 0.0;
                bool ok = false;
                for (unsigned it = 0; it < settings.max_inner_iterations; ++it) {
                    double y_next =
                        expectation[k] +
                        dt * spec.eval(seg, t, y, z_slice[k],
                                       {&u_jump(k, 0), n_atoms}, atoms);
                    const double delta = y_next - y;
                    if (it > 0 && delta * prev_delta < 0.0)
                        y_next = 0.5 * (y_next + y); // damp oscillation
                    prev_delta = delta;
                    sol.diagnostics.max_inner_iterations =
                        std::max<std::size_t>(sol.diagnostics.max_inner_iterations, it + 1);
                    if (std::fabs(y_next - y) < settings.fixed_point_tol) {
                        y = y_next;
                        ok = true;
                        break;
                    }
                    y = y_next;
                }
                if (!ok)
                    throw NumericalError("inner Y fixed point failed at t=" +
                                         std::to_string(t) + ", state=" +
                                         std::to_string(state));
                u_new[k] = y;
            }
            double slice_delta = 0.0;
            for (std::size_t k = 0; k < m; ++k)
                slice_delta = std::max(slice_delta, std::fabs(u_new[k] - u_cur[k]));
            u_cur = u_new;
            slice_done = slice_delta < settings.fixed_point_tol;
        }
        if (!slice_done)
            throw NumericalError("slice fixed point failed at t=" + std::to_string(t));

        for (std::size_t k = 0; k < m; ++k)
            sol.Y(step, k) = u_cur[k];
        fill_zu(step, sol.Y.row(step));
    }

    sol.diagnostics.lattice_escape_warning =
        sol.diagnostics.lattice_escape > settings.escape_warn_threshold;
    if (sol.diagnostics.lattice_escape_warning)
        sol.diagnostics.notes.push_back("forward transitions clipped at the lattice edge");
    return sol;
}

std::vector<double> regress_fitted(std::span<const double> covariate,
                                   std::span<const double> target, unsigned degree,
                                   bool* used_ridge) {
    NodeRegression reg(covariate, degree);
    if (used_ridge)
        *used_ridge = reg.used_ridge();
    std::vector<double> fitted(target.size());
    reg.fit(target, fitted);
    return fitted;
}

DiscreteSolution solve_path_bsde(const PathDriverFn& driver,
                                 std::span<const double> terminal_values,
                                 std::shared_ptr<const PathBundle> bundle,
                                 std::span<const JumpAtom> atoms,
                                 const RegressionBasis& basis, double tol,
                                 unsigned max_iter, std::size_t first_node) {
    if (!bundle)
        throw ConfigurationError("path solver needs a bundle");
    const TimeGrid& grid = bundle->grid;
    const std::size_t n_nodes = grid.size();
    const std::size_t n_paths = bundle->n_paths;
    const std::size_t n_atoms = atoms.size();
    if (terminal_values.size() != n_paths)
        throw ConfigurationError("terminal values do not match the bundle");
    if (n_atoms != bundle->n_atoms)
        throw ConfigurationError("atom list does not match the bundle");
    if (max_iter == 0)
        throw ConfigurationError("max_iter must be >= 1");

    DiscreteSolution sol;
    sol.grid = grid;
    sol.kind = SolutionKind::Paths;
    sol.bundle = bundle;
    for (const auto& a : atoms)
        sol.atom_marks.push_back(a.mark);
    sol.Y = Array2(n_nodes, n_paths);
    sol.Z = Array2(n_nodes, n_paths);
    sol.U = Array3(n_nodes, n_paths, n_atoms);

    for (std::size_t p = 0; p < n_paths; ++p)
        sol.Y(n_nodes - 1, p) = terminal_values[p];

    // One regression factorization per node, reused across iterations.
    std::vector<NodeRegression> regressions;
    regressions.reserve(n_nodes);
    std::vector<double> column(n_paths);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        for (std::size_t p = 0; p < n_paths; ++p)
            column[p] = bundle->value(p, i);
        regressions.emplace_back(column, basis.degree);
        if (regressions.back().used_ridge())
            ++sol.diagnostics.ridge_fallbacks;
    }

    Array2 y_new(n_nodes, n_paths), z_new(n_nodes, n_paths);
    Array3 u_new(n_nodes, n_paths, n_atoms);
    Array2 drivers(n_nodes, n_paths);
    std::vector<double> target(n_paths), fitted(n_paths);

    const std::size_t last = n_nodes - 1;
    bool converged = false;
    double diff = 0.0;
    unsigned iter = 0;
    for (; iter < max_iter; ++iter) {
        for (std::size_t i = first_node; i < last; ++i)
            for (std::size_t p = 0; p < n_paths; ++p)
                drivers(i, p) =
                    driver(i, p, sol.Y(i, p), sol.Z(i, p), sol.U.slice(i, p));

        // Y^{n+1}(t_i) = fit of  xi + sum_{s>=i} f(s) dt_s.
        for (std::size_t p = 0; p < n_paths; ++p)
            y_new(last, p) = terminal_values[p];
        for (std::size_t p = 0; p < n_paths; ++p)
            target[p] = terminal_values[p];
        for (std::size_t i = last; i-- > first_node;) {
            const double dt = grid.dt(i);
            for (std::size_t p = 0; p < n_paths; ++p)
                target[p] += drivers(i, p) * dt;
            regressions[i].fit(target, fitted);
            for (std::size_t p = 0; p < n_paths; ++p)
                y_new(i, p) = fitted[p];
        }

        // Z and U from increment weights; the fitted Y(t_i) is subtracted as
        // a control variate (same conditional expectation, less noise).
        for (std::size_t i = first_node; i < last; ++i) {
            const double dt = grid.dt(i);
            for (std::size_t p = 0; p < n_paths; ++p)
                target[p] = (y_new(i + 1, p) - y_new(i, p)) * bundle->w(p, i) / dt;
            regressions[i].fit(target, fitted);
            for (std::size_t p = 0; p < n_paths; ++p)
                z_new(i, p) = fitted[p];
            for (std::size_t j = 0; j < n_atoms; ++j) {
                const double mean_count = atoms[j].intensity * dt;
                for (std::size_t p = 0; p < n_paths; ++p)
                    target[p] = (y_new(i + 1, p) - y_new(i, p)) *
                                (static_cast<double>(bundle->count(p, i, j)) - mean_count) /
                                mean_count;
                regressions[i].fit(target, fitted);
                for (std::size_t p = 0; p < n_paths; ++p)
                    u_new(i, p, j) = fitted[p];
            }
        }
        // Terminal row keeps the last integrand values.
        if (last > first_node) {
            for (std::size_t p = 0; p < n_paths; ++p) {
                z_new(last, p) = z_new(last - 1, p);
                for (std::size_t j = 0; j < n_atoms; ++j)
                    u_new(last, p, j) = u_new(last - 1, p, j);
            }
        }

        double sum_sq = 0.0;
        for (std::size_t i = first_node; i < n_nodes; ++i)
            for (std::size_t p = 0; p < n_paths; ++p) {
                const double d = y_new(i, p) - sol.Y(i, p);
                sum_sq += d * d;
            }
        diff = std::sqrt(sum_sq / (static_cast<double>(n_nodes - first_node) *
                                   static_cast<double>(n_paths)));
        sol.diagnostics.residual_history.push_back(diff);

        std::swap(sol.Y, y_new);
        std::swap(sol.Z, z_new);
        std::swap(sol.U, u_new);

        if (diff < tol) {
            converged = true;
            ++iter;
            break;
        }
    }
    sol.diagnostics.iterations = iter;
    sol.diagnostics.converged = converged;
    if (!converged)
        sol.diagnostics.notes.push_back("Picard iteration stopped at max_iter");
    return sol;
}

DiscreteSolution solve_picard_regression(const LevyTriplet& model, const GeneratorSpec& spec,
                                         const TerminalSpec& terminal,
                                         std::shared_ptr<const PathBundle> bundle,
                                         const RegressionBasis& basis, double tol,
                                         unsigned max_iter) {
    if (!bundle)
        throw ConfigurationError("path solver needs a bundle");
    const auto atoms = model.atoms();
    const TimeGrid& grid = bundle->grid;
    const std::size_t n_paths = bundle->n_paths;

    std::vector<double> terminal_values(n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) {
        const PathSegment full{grid.nodes(), bundle->path(p)};
        terminal_values[p] = terminal.xi(full);
    }

    const PathBundle* raw = bundle.get();
    PathDriverFn driver = [raw, &spec, &grid, atoms](std::size_t node, std::size_t path,
                                                     double y, double z,
                                                     std::span<const double> u) {
        const PathSegment seg{{grid.nodes().data(), node + 1},
                              raw->path(path).subspan(0, node + 1)};
        return spec.eval(seg, grid[node], y, z, u, atoms);
    };
    return solve_path_bsde(driver, terminal_values, bundle, atoms, basis, tol, max_iter);
}

std::vector<double> closed_form_linear(double A_xi, const std::function<double(double)>& a,
                                       const std::function<double(double)>& k_f,
                                       const TimeGrid& grid) {
    const double T = grid.horizon();
    auto exp_a = [&](double lo, double hi) {
        return std::exp(integrate(a, lo, hi, 1e-10));
    };
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double t = grid[i];
        out[i] = A_xi * exp_a(t, T) +
                 integrate([&](double s) { return k_f(s) * exp_a(t, s); }, t, T, 1e-10);
    }
    return out;
}

} // namespace bsde
