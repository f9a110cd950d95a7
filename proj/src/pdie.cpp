#include "bsde/pdie.hpp"

#include <Eigen/Sparse>
#include <cmath>

#include "bsde/errors.hpp"
#include "bsde/fdiff.hpp"
#include "bsde/interp.hpp"

namespace bsde {

namespace {

void require_space_grid(std::span<const double> v) {
    if (v.size() < 3)
        throw ConfigurationError("space grid needs at least 3 nodes");
    for (std::size_t k = 0; k + 1 < v.size(); ++k)
        if (!(v[k] < v[k + 1]))
            throw ConfigurationError("space grid must be strictly increasing");
}

} // namespace

std::vector<double> apply_A(std::span<const double> phi, const ForwardSpec& forward,
                            std::span<const double> v) {
    require_space_grid(v);
    if (phi.size() != v.size())
        throw ConfigurationError("slice does not match the space grid");
    const auto d1 = lattice_gradient(v, phi);
    const auto d2 = lattice_second(v, phi);
    std::vector<double> out(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double s = forward.sigma_coef(v[k]);
        out[k] = 0.5 * s * s * d2[k] + forward.b_coef(v[k]) * d1[k];
    }
    return out;
}

JumpOpResult apply_K(std::span<const double> phi, const ForwardSpec& forward,
                     std::span<const JumpAtom> atoms, std::span<const double> v) {
    require_space_grid(v);
    if (phi.size() != v.size())
        throw ConfigurationError("slice does not match the space grid");
    const MonotoneCubic interp(v, phi);
    const auto d1 = lattice_gradient(v, phi);
    JumpOpResult out;
    out.values.assign(v.size(), 0.0);
    for (std::size_t k = 0; k < v.size(); ++k) {
        double acc = 0.0;
        for (const auto& atom : atoms) {
            const double b = forward.beta(v[k], atom.mark);
            const double dest = v[k] + b;
            if (interp.clips(dest))
                ++out.clipped;
            acc += (interp(dest) - phi[k] - b * d1[k]) * atom.intensity;
        }
        out.values[k] = acc;
    }
    return out;
}

JumpOpResult apply_B(std::span<const double> phi, const ForwardSpec& forward,
                     std::span<const JumpAtom> atoms, std::span<const double> v) {
    require_space_grid(v);
    if (phi.size() != v.size())
        throw ConfigurationError("slice does not match the space grid");
    const MonotoneCubic interp(v, phi);
    JumpOpResult out;
    out.values.assign(v.size(), 0.0);
    for (std::size_t k = 0; k < v.size(); ++k) {
        double acc = 0.0;
        for (const auto& atom : atoms) {
            const double dest = v[k] + forward.beta(v[k], atom.mark);
            if (interp.clips(dest))
                ++out.clipped;
            acc += (interp(dest) - phi[k]) * kappa(atom.mark) * atom.intensity;
        }
        out.values[k] = acc;
    }
    return out;
}

PdieGrid solve_pdie(const ForwardSpec& forward, const GeneratorSpec& spec,
                    const std::function<double(double)>& g_terminal,
                    std::vector<double> space_nodes, const TimeGrid& tgrid,
                    std::span<const JumpAtom> atoms) {
    require_space_grid(space_nodes);
    const std::size_t m = space_nodes.size();
    const std::size_t n_nodes = tgrid.size();
    const std::size_t n_atoms = atoms.size();

    // Stability of the explicitly treated terms.
    double lambda_total = 0.0;
    for (const auto& atom : atoms)
        lambda_total += atom.intensity;
    double a_max = 0.0;
    for (std::size_t i = 0; i < n_nodes; ++i)
        a_max = std::max(a_max, spec.a(tgrid[i]));
    double dt_max = 0.0;
    for (std::size_t i = 0; i + 1 < n_nodes; ++i)
        dt_max = std::max(dt_max, tgrid.dt(i));
    const double rate = lambda_total + a_max;
    if (dt_max * rate > 1.0)
        throw ConfigurationError(
            "time step violates the explicit-part stability bound; need dt <= " +
            std::to_string(1.0 / rate));

    PdieGrid grid{std::move(space_nodes), tgrid, Array2(n_nodes, m)};
    const auto& v = grid.space_nodes;

    for (std::size_t k = 0; k < m; ++k)
        grid.values(n_nodes - 1, k) = g_terminal(v[k]);

    // The diffusion operator is autonomous; assemble it once.
    const auto im = static_cast<Eigen::Index>(m);
    Eigen::SparseMatrix<double> a_op(im, im);
    {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(3 * m);
        for (std::size_t k = 0; k < m; ++k) {
            const double s = forward.sigma_coef(v[k]);
            const double diff = 0.5 * s * s;
            const double drift = forward.b_coef(v[k]);
            const auto s2 = second_derivative_stencil(v, k);
            const auto s1 = first_derivative_stencil(v, k);
            double row[3] = {diff * s2.c0 + drift * s1.c0, diff * s2.c1 + drift * s1.c1,
                             diff * s2.c2 + drift * s1.c2};
            for (int c = 0; c < 3; ++c)
                trip.emplace_back(static_cast<Eigen::Index>(k),
                                  static_cast<Eigen::Index>(s2.i0 + c), row[c]);
        }
        a_op.setFromTriplets(trip.begin(), trip.end());
    }

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    double factored_dt = -1.0;
    Eigen::SparseMatrix<double> identity(im, im);
    identity.setIdentity();

    std::vector<double> u_next(m), rhs(m), u_jump(n_atoms);
    for (std::size_t step = n_nodes - 1; step-- > 0;) {
        const double dt = grid.tgrid.dt(step);
        const double t_next = grid.tgrid[step + 1];
        for (std::size_t k = 0; k < m; ++k)
            u_next[k] = grid.values(step + 1, k);

        if (dt != factored_dt) {
            Eigen::SparseMatrix<double> system = identity - dt * a_op;
            system.makeCompressed();
            lu.compute(system);
            if (lu.info() != Eigen::Success)
                throw NumericalError("implicit diffusion solve failed to factor");
            factored_dt = dt;
        }

        const auto k_op = apply_K(u_next, forward, atoms, v);
        const auto grad = lattice_gradient(v, u_next);
        const MonotoneCubic interp(v, u_next);
        for (std::size_t k = 0; k < m; ++k) {
            const double state = v[k];
            for (std::size_t j = 0; j < n_atoms; ++j)
                u_jump[j] = interp(state + forward.beta(state, atoms[j].mark)) - u_next[k];
            const PathSegment seg{{&t_next, 1}, {&state, 1}};
            const double f_val =
                spec.eval(seg, t_next, u_next[k], grad[k], u_jump, atoms);
            rhs[k] = u_next[k] + dt * (k_op.values[k] + f_val);
        }

        Eigen::Map<const Eigen::VectorXd> rhs_vec(rhs.data(), im);
        const Eigen::VectorXd solved = lu.solve(rhs_vec);
        if (lu.info() != Eigen::Success)
            throw NumericalError("implicit diffusion solve failed");
        for (std::size_t k = 0; k < m; ++k)
            grid.values(step, k) = solved(static_cast<Eigen::Index>(k));
    }
    return grid;
}

CrossValidationReport cross_validate(const PdieGrid& pgrid, const DiscreteSolution& fbsde) {
    if (fbsde.kind != SolutionKind::Lattice)
        throw ConfigurationError("cross-validation needs a lattice BSDE solution");
    if (pgrid.space_nodes != fbsde.states)
        throw ConfigurationError("cross-validation requires identical space grids");

    CrossValidationReport report;
    double sum_sq = 0.0;
    std::size_t count = 0;
    for (std::size_t it = 0; it < pgrid.tgrid.size(); ++it) {
        const double t = pgrid.tgrid[it];
        // match against the (possibly coarser) BSDE grid
        std::size_t match = fbsde.grid.size();
        for (std::size_t jt = 0; jt < fbsde.grid.size(); ++jt)
            if (std::fabs(fbsde.grid[jt] - t) <= 1e-9) {
                match = jt;
                break;
            }
        if (match == fbsde.grid.size())
            continue;
        const std::size_t m = pgrid.space_nodes.size();
        const std::size_t inner_lo = m / 4, inner_hi = m - m / 4;
        double sup = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double d = std::fabs(pgrid.values(it, k) - fbsde.Y(match, k));
            sup = std::max(sup, d);
            if (k >= inner_lo && k < inner_hi)
                report.inner_sup_error = std::max(report.inner_sup_error, d);
            sum_sq += d * d;
            ++count;
        }
        report.times.push_back(t);
        report.per_time_sup.push_back(sup);
        report.sup_error = std::max(report.sup_error, sup);
    }
    if (count == 0)
        throw ConfigurationError("cross-validation grids share no time nodes");
    report.l2_error = std::sqrt(sum_sq / static_cast<double>(count));
    return report;
}

ForwardConditionsReport check_forward_conditions(const ForwardSpec& forward, Range psi_box,
                                                 Range mark_box,
                                                 std::span<const JumpAtom> atoms,
                                                 unsigned samples_per_axis) {
    if (samples_per_axis < 2)
        samples_per_axis = 2;
    const unsigned n = samples_per_axis;
    auto at = [n](const Range& r, unsigned i) {
        return r.lo + (r.hi - r.lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    };
    auto fd = [](const std::function<double(double)>& f, double x) {
        const double h = 1e-5 * (1.0 + std::fabs(x));
        return (f(x + h) - f(x - h)) / (2.0 * h);
    };
    auto fd2 = [](const std::function<double(double)>& f, double x) {
        const double h = 1e-4 * (1.0 + std::fabs(x));
        return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    };

    ForwardConditionsReport report;
    ForwardConditionsReport::Item sigma_bounded{"sigma_bounded_away_from_0_and_above", true,
                                                std::numeric_limits<double>::infinity(), 0, 0};
    ForwardConditionsReport::Item combo{"drift_diffusion_combination_bounded", true,
                                        -std::numeric_limits<double>::infinity(), 0, 0};
    ForwardConditionsReport::Item beta_nonneg{"beta_nonnegative", true,
                                              std::numeric_limits<double>::infinity(), 0, 0};
    ForwardConditionsReport::Item beta_slope{"beta_state_slope_in_(-1,0]", true, 0.0, 0, 0};
    ForwardConditionsReport::Item drift_slope{"drift_slope_bounded", true,
                                              -std::numeric_limits<double>::infinity(), 0, 0};
    ForwardConditionsReport::Item beta_integral{"beta_slope_nu_integral_bounded", true,
                                                -std::numeric_limits<double>::infinity(), 0,
                                                0};

    for (unsigned i = 0; i < n; ++i) {
        const double psi = at(psi_box, i);
        const double s = forward.sigma_coef(psi);
        if (std::fabs(s) < sigma_bounded.value) {
            sigma_bounded.value = std::fabs(s);
            sigma_bounded.witness_psi = psi;
        }
        const double ds = fd(forward.sigma_coef, psi);
        const double d2s = fd2(forward.sigma_coef, psi);
        const double b = forward.b_coef(psi);
        double nu_term = 0.0, slope_integral = 0.0;
        for (const auto& atom : atoms) {
            nu_term += (ds / s) * forward.beta(psi, atom.mark) * atom.intensity;
            const double dbeta =
                fd([&](double q) { return forward.beta(q, atom.mark); }, psi);
            slope_integral -= dbeta * atom.intensity;
        }
        const double combo_val = 0.5 * ds * ds - ds * b / s - 0.5 * s * d2s + nu_term;
        if (!std::isfinite(combo_val)) {
            combo.ok = false;
            combo.witness_psi = psi;
            combo.value = combo_val;
        } else if (combo_val > combo.value) {
            combo.value = combo_val;
            combo.witness_psi = psi;
        }
        const double drift_val = fd(forward.b_coef, psi) - 0.5 * ds * ds;
        if (!std::isfinite(drift_val)) {
            drift_slope.ok = false;
            drift_slope.witness_psi = psi;
            drift_slope.value = drift_val;
        } else if (drift_val > drift_slope.value) {
            drift_slope.value = drift_val;
            drift_slope.witness_psi = psi;
        }
        if (!std::isfinite(slope_integral)) {
            beta_integral.ok = false;
            beta_integral.witness_psi = psi;
            beta_integral.value = slope_integral;
        } else if (slope_integral > beta_integral.value) {
            beta_integral.value = slope_integral;
            beta_integral.witness_psi = psi;
        }

        for (unsigned j = 0; j < n; ++j) {
            const double x = at(mark_box, j);
            if (x == 0.0)
                continue;
            const double bval = forward.beta(psi, x);
            if (bval < beta_nonneg.value) {
                beta_nonneg.value = bval;
                beta_nonneg.witness_psi = psi;
                beta_nonneg.witness_x = x;
            }
            const double dbeta = fd([&](double q) { return forward.beta(q, x); }, psi);
            const double excess = std::max(dbeta - 0.0, -1.0 - dbeta);
            if (excess > beta_slope.value) {
                beta_slope.value = excess > 0.0 ? dbeta : beta_slope.value;
                beta_slope.witness_psi = psi;
                beta_slope.witness_x = x;
            }
            if (dbeta > 1e-9 || dbeta <= -1.0 + 1e-12) {
                beta_slope.ok = false;
                beta_slope.value = dbeta;
                beta_slope.witness_psi = psi;
                beta_slope.witness_x = x;
            }
        }
    }
    sigma_bounded.ok = sigma_bounded.value > 1e-12 && std::isfinite(sigma_bounded.value);
    beta_nonneg.ok = beta_nonneg.value >= -1e-12;

    report.items = {sigma_bounded, combo, beta_nonneg, beta_slope, drift_slope, beta_integral};
    for (const auto& item : report.items)
        report.all_ok = report.all_ok && item.ok;
    return report;
}

} // namespace bsde
