#include "bsde/generator.hpp"

#include <cmath>
#include <memory>
#include <vector>

#include "bsde/errors.hpp"
#include "bsde/quadrature.hpp"
#include "bsde/rng.hpp"

namespace bsde {

namespace {

double fd_step(double x) { return 1e-6 * (1.0 + std::fabs(x)); }

} // namespace

double GeneratorSpec::eval(const PathSegment& path, double t, double y, double z,
                           std::span<const double> u_per_atom,
                           std::span<const JumpAtom> atoms) const {
    if (custom_eval)
        return custom_eval(path, t, y, z, u_per_atom, atoms);
    return f(path, t, y, z, eval_G(*this, t, u_per_atom, atoms));
}

double GeneratorSpec::eval_agg(const PathSegment& path, double t, double y, double z,
                               double u_agg) const {
    return f(path, t, y, z, u_agg);
}

double GeneratorSpec::dy(const PathSegment& path, double t, double y, double z,
                         double u_agg) const {
    if (df_y)
        return df_y(path, t, y, z, u_agg);
    if (!f)
        throw ConfigurationError("driver derivative needs the structured form");
    const double h = fd_step(y);
    return (f(path, t, y + h, z, u_agg) - f(path, t, y - h, z, u_agg)) / (2.0 * h);
}

double GeneratorSpec::dz(const PathSegment& path, double t, double y, double z,
                         double u_agg) const {
    if (df_z)
        return df_z(path, t, y, z, u_agg);
    if (!f)
        throw ConfigurationError("driver derivative needs the structured form");
    const double h = fd_step(z);
    return (f(path, t, y, z + h, u_agg) - f(path, t, y, z - h, u_agg)) / (2.0 * h);
}

double GeneratorSpec::du(const PathSegment& path, double t, double y, double z,
                         double u_agg) const {
    if (df_u)
        return df_u(path, t, y, z, u_agg);
    if (!f)
        throw ConfigurationError("driver derivative needs the structured form");
    const double h = fd_step(u_agg);
    return (f(path, t, y, z, u_agg + h) - f(path, t, y, z, u_agg - h)) / (2.0 * h);
}

double GeneratorSpec::dg_at(double t, double u) const {
    if (dg)
        return dg(t, u);
    const double h = fd_step(u);
    return (g(t, u + h) - g(t, u - h)) / (2.0 * h);
}

double eval_G(const GeneratorSpec& spec, double t, const std::function<double(double)>& U,
              std::span<const JumpAtom> atoms) {
    double s = 0.0;
    for (const auto& atom : atoms)
        s += spec.g(t, U(atom.mark)) * kappa(atom.mark) * atom.intensity;
    return s;
}

double eval_G(const GeneratorSpec& spec, double t, std::span<const double> u_per_atom,
              std::span<const JumpAtom> atoms) {
    double s = 0.0;
    for (std::size_t j = 0; j < atoms.size(); ++j)
        s += spec.g(t, u_per_atom[j]) * kappa(atoms[j].mark) * atoms[j].intensity;
    return s;
}

double smooth_clamp(double x, double M) {
    if (M < 1.0)
        throw DomainError("smooth_clamp requires M >= 1");
    const double ax = std::fabs(x);
    const double s = (x < 0.0) ? -1.0 : 1.0;
    if (ax <= M - 1.0)
        return x;
    if (ax >= M + 1.0)
        return s * M;
    // Cubic Hermite blend on [M-1, M+1]: value M-1 -> M, slope 1 -> 0.
    const double t = (ax - (M - 1.0)) / 2.0;
    const double t2 = t * t, t3 = t2 * t;
    const double v = (2.0 * t3 - 3.0 * t2 + 1.0) * (M - 1.0) +
                     (t3 - 2.0 * t2 + t) * 2.0 + (-2.0 * t3 + 3.0 * t2) * M;
    return s * v;
}

double smooth_clamp_deriv(double x, double M) {
    if (M < 1.0)
        throw DomainError("smooth_clamp requires M >= 1");
    const double ax = std::fabs(x);
    if (ax <= M - 1.0)
        return 1.0;
    if (ax >= M + 1.0)
        return 0.0;
    const double t = (ax - (M - 1.0)) / 2.0;
    return 1.0 - t; // derivative of the blend in x
}

namespace {

double exp_int_a(const std::function<double(double)>& a, double lo, double hi) {
    return std::exp(integrate(a, lo, hi, 1e-9));
}

// front * exp(int_t^T a) + int_t^T w(s) exp(int_t^s a) ds
double decay_envelope(double front, const std::function<double(double)>& a,
                      const std::function<double(double)>& w, double t, double T) {
    return front * exp_int_a(a, t, T) +
           integrate([&](double s) { return w(s) * exp_int_a(a, t, s); }, t, T, 1e-8);
}

} // namespace

BoundCertificate compute_bounds(const GeneratorSpec& spec, const TerminalSpec& terminal,
                                std::span<const JumpAtom> atoms, double T) {
    if (!(T > 0.0))
        throw ConfigurationError("horizon must be positive");
    if (!spec.a || !spec.k_f || !spec.p || !spec.rho)
        throw ConfigurationError("bound certificate needs a, k_f, p and rho");
    if (!std::isfinite(terminal.A_xi))
        throw ConfigurationError("terminal.A_xi must be finite to compute bounds");
    const auto a = spec.a;
    const auto k_f = spec.k_f;
    const auto p = spec.p;
    const auto A_Dxi =
        terminal.A_Dxi ? terminal.A_Dxi : std::function<double(double)>([](double) {
            return 0.0;
        });
    const double A_xi = terminal.A_xi;
    const std::vector<JumpAtom> atom_list(atoms.begin(), atoms.end());

    BoundCertificate cert;
    cert.R = decay_envelope(A_xi, a, k_f, 0.0, T) + 1.0;
    cert.Q = decay_envelope(A_Dxi(0.0), a, [&](double s) { return p(s, 0.0); }, 0.0, T) + 1.0;
    cert.P = spec.rho(2.0 * cert.R) * kappa_l2_norm(atoms) *
                 decay_envelope(
                     l2_nu_norm(A_Dxi, atoms), a,
                     [&](double s) {
                         return l2_nu_norm([&](double x) { return p(s, x); }, atom_list);
                     },
                     0.0, T) +
             1.0;

    cert.y_envelope = [A_xi, a, k_f, T](double t) {
        return decay_envelope(A_xi, a, k_f, t, T);
    };
    cert.z_envelope = [A_Dxi, a, p, T](double t) {
        return decay_envelope(A_Dxi(0.0), a, [&](double s) { return p(s, 0.0); }, t, T);
    };
    cert.u_envelope = [A_Dxi, a, p, T](double t, double mark) {
        return decay_envelope(A_Dxi(mark), a, [&](double s) { return p(s, mark); }, t, T);
    };
    return cert;
}

double truncated_zu_lipschitz(const GeneratorSpec& spec, const BoundCertificate& cert,
                              std::span<const JumpAtom> atoms) {
    const double r2 = spec.rho(2.0 * cert.R);
    return spec.rho(std::max(cert.Q, cert.P)) * (1.0 + r2 * kappa_l2_norm(atoms));
}

GeneratorSpec truncate_generator(const GeneratorSpec& spec, const BoundCertificate& cert,
                                 [[maybe_unused]] std::span<const JumpAtom> atoms) {
    const double R = cert.R, Q = cert.Q, P = cert.P;
    GeneratorSpec out = spec;

    if (spec.custom_eval) {
        // General driver: clamp y, z and every u value; the aggregations stay
        // inside the custom evaluation.
        auto inner = spec.custom_eval;
        out.custom_eval = [inner, R, Q](const PathSegment& path, double t, double y,
                                        double z, std::span<const double> u,
                                        std::span<const JumpAtom> atom_list) {
            std::vector<double> uc(u.size());
            for (std::size_t j = 0; j < u.size(); ++j)
                uc[j] = smooth_clamp(u[j], 2.0 * R);
            return inner(path, t, smooth_clamp(y, R), smooth_clamp(z, Q), uc, atom_list);
        };
        out.f = nullptr;
        out.df_y = out.df_z = out.df_u = nullptr;
        out.rho = [rho = spec.rho, R, Q, P](double) {
            return rho(std::max({Q, P, 2.0 * R}));
        };
        return out;
    }

    auto f0 = spec.f;
    out.f = [f0, R, Q, P](const PathSegment& path, double t, double y, double z,
                          double u_agg) {
        return f0(path, t, smooth_clamp(y, R), smooth_clamp(z, Q), smooth_clamp(u_agg, P));
    };
    auto g0 = spec.g;
    out.g = [g0, R](double t, double u) { return g0(t, smooth_clamp(u, 2.0 * R)); };
    auto spec_copy = std::make_shared<GeneratorSpec>(spec);
    out.dg = [spec_copy, R](double t, double u) {
        return spec_copy->dg_at(t, smooth_clamp(u, 2.0 * R)) *
               smooth_clamp_deriv(u, 2.0 * R);
    };
    // Chain rule through the clamps so derivative-based consumers see the
    // truncated driver.
    out.df_y = [spec_copy, R, Q, P](const PathSegment& path, double t, double y, double z,
                                    double u_agg) {
        return spec_copy->dy(path, t, smooth_clamp(y, R), smooth_clamp(z, Q),
                             smooth_clamp(u_agg, P)) *
               smooth_clamp_deriv(y, R);
    };
    out.df_z = [spec_copy, R, Q, P](const PathSegment& path, double t, double y, double z,
                                    double u_agg) {
        return spec_copy->dz(path, t, smooth_clamp(y, R), smooth_clamp(z, Q),
                             smooth_clamp(u_agg, P)) *
               smooth_clamp_deriv(z, Q);
    };
    out.df_u = [spec_copy, R, Q, P](const PathSegment& path, double t, double y, double z,
                                    double u_agg) {
        return spec_copy->du(path, t, smooth_clamp(y, R), smooth_clamp(z, Q),
                             smooth_clamp(u_agg, P)) *
               smooth_clamp_deriv(u_agg, P);
    };
    if (spec.d_malliavin_f) {
        auto dmf = spec.d_malliavin_f;
        out.d_malliavin_f = [dmf, R, Q, P](double r, double v, const PathSegment& path,
                                           double t, double y, double z, double u_agg) {
            return dmf(r, v, path, t, smooth_clamp(y, R), smooth_clamp(z, Q),
                       smooth_clamp(u_agg, P));
        };
    }
    out.rho = [rho = spec.rho, R, Q, P](double) {
        return rho(std::max({Q, P, 2.0 * R}));
    };
    return out;
}

ComparisonConditionReport check_comparison_condition(const GeneratorSpec& spec,
                                                     const SampleBox& box,
                                                     unsigned lattice_points,
                                                     unsigned random_points,
                                                     std::uint64_t seed) {
    if (lattice_points < 2)
        lattice_points = 2;
    ComparisonConditionReport report;
    report.worst_violation = std::numeric_limits<double>::infinity();

    const double t0 = 0.0;
    const double zero = 0.0;
    PathSegment flat{{&t0, 1}, {&zero, 1}};

    auto probe = [&](double t, double y, double z, double u, double u_prime) {
        const double product = spec.du(flat, t, y, z, u) * spec.dg_at(t, u_prime);
        const double margin = product + 1.0;
        if (margin < report.worst_violation) {
            report.worst_violation = margin;
            report.witness = {t, y, z, u, u_prime};
        }
    };

    auto lattice_value = [&](const Range& r, unsigned i) {
        return r.lo + (r.hi - r.lo) * static_cast<double>(i) /
                          static_cast<double>(lattice_points - 1);
    };
    for (unsigned it = 0; it < lattice_points; ++it)
        for (unsigned iy = 0; iy < lattice_points; ++iy)
            for (unsigned iz = 0; iz < lattice_points; ++iz)
                for (unsigned iu = 0; iu < lattice_points; ++iu)
                    for (unsigned iv = 0; iv < lattice_points; ++iv)
                        probe(lattice_value(box.t, it), lattice_value(box.y, iy),
                              lattice_value(box.z, iz), lattice_value(box.u, iu),
                              lattice_value(box.u_prime, iv));

    CounterRng rng(seed, 0);
    auto draw = [&](const Range& r) { return r.lo + (r.hi - r.lo) * rng.next_uniform(); };
    for (unsigned k = 0; k < random_points; ++k)
        probe(draw(box.t), draw(box.y), draw(box.z), draw(box.u), draw(box.u_prime));

    report.ok = report.worst_violation >= -1e-9;
    return report;
}

GeneratorSpec make_zero_generator() {
    GeneratorSpec spec;
    spec.f = [](const PathSegment&, double, double, double, double) { return 0.0; };
    spec.g = [](double, double u) { return u; };
    spec.dg = [](double, double) { return 1.0; };
    spec.a = [](double) { return 0.0; };
    spec.b = [](double) { return 0.0; };
    spec.k_f = [](double) { return 0.0; };
    spec.rho = [](double) { return 1.0; };
    spec.p = [](double, double) { return 0.0; };
    spec.df_y = spec.df_z = spec.df_u =
        [](const PathSegment&, double, double, double, double) { return 0.0; };
    return spec;
}

GeneratorSpec make_linear_generator(double alpha, double beta, double gamma_u,
                                    double delta) {
    GeneratorSpec spec = make_zero_generator();
    spec.f = [=](const PathSegment&, double, double y, double z, double u_agg) {
        return alpha * y + beta * z + gamma_u * u_agg + delta;
    };
    spec.df_y = [=](const PathSegment&, double, double, double, double) { return alpha; };
    spec.df_z = [=](const PathSegment&, double, double, double, double) { return beta; };
    spec.df_u = [=](const PathSegment&, double, double, double, double) { return gamma_u; };
    spec.a = [=](double) { return std::fabs(alpha); };
    spec.b = [=](double) { return std::max(std::fabs(beta), std::fabs(gamma_u)); };
    spec.k_f = [=](double) { return std::fabs(delta); };
    spec.rho = [](double) { return 1.0; };
    return spec;
}

GeneratorSpec make_subquadratic_z_generator(double c) {
    if (!(c >= 0.0))
        throw ConfigurationError("subquadratic family needs c >= 0");
    GeneratorSpec spec = make_zero_generator();
    spec.f = [=](const PathSegment&, double, double, double z, double) {
        return c * z * std::tanh(z);
    };
    spec.df_y = [](const PathSegment&, double, double, double, double) { return 0.0; };
    spec.df_z = [=](const PathSegment&, double, double, double z, double) {
        const double th = std::tanh(z);
        return c * (th + z * (1.0 - th * th));
    };
    spec.df_u = [](const PathSegment&, double, double, double, double) { return 0.0; };
    spec.a = [](double) { return 0.0; };
    spec.b = [](double) { return 1.0; };
    spec.k_f = [](double) { return 0.0; };
    spec.rho = [=](double r) { return 2.0 * c * (1.0 + r); };
    return spec;
}

GeneratorSpec make_envelope_generator(std::function<double(double)> a,
                                      std::function<double(double)> k_f) {
    GeneratorSpec spec = make_zero_generator();
    auto a_fn = std::move(a);
    auto k_fn = std::move(k_f);
    spec.f = [a_fn, k_fn](const PathSegment&, double t, double y, double, double) {
        return k_fn(t) + a_fn(t) * std::fabs(y);
    };
    spec.df_y = [a_fn](const PathSegment&, double t, double y, double, double) {
        return (y < 0.0) ? -a_fn(t) : a_fn(t);
    };
    spec.df_z = [](const PathSegment&, double, double, double, double) { return 0.0; };
    spec.df_u = [](const PathSegment&, double, double, double, double) { return 0.0; };
    spec.a = a_fn;
    spec.b = [](double) { return 0.0; };
    spec.k_f = k_fn;
    spec.rho = [](double) { return 1.0; };
    return spec;
}

TerminalSpec make_constant_terminal(double c) {
    TerminalSpec t;
    t.xi = [c](const PathSegment&) { return c; };
    t.A_xi = std::fabs(c);
    t.A_Dxi = [](double) { return 0.0; };
    t.d_xi_0 = [](const PathSegment&, double) { return 0.0; };
    return t;
}

TerminalSpec make_terminal_value(double sigma, double declared_A_xi) {
    TerminalSpec t;
    t.xi = [](const PathSegment& path) { return path.values.back(); };
    t.A_xi = declared_A_xi;
    t.A_Dxi = [sigma](double mark) { return (mark == 0.0) ? sigma : std::fabs(mark); };
    t.d_xi_0 = [sigma](const PathSegment&, double) { return sigma; };
    return t;
}

TerminalSpec make_tanh_terminal(double scale, double sigma) {
    TerminalSpec t;
    t.xi = [scale](const PathSegment& path) { return std::tanh(scale * path.values.back()); };
    t.A_xi = 1.0;
    t.A_Dxi = [scale, sigma](double mark) {
        if (mark == 0.0)
            return std::fabs(scale) * sigma;
        return std::min(std::fabs(scale * mark), 2.0);
    };
    t.d_xi_0 = [scale, sigma](const PathSegment& path, double) {
        const double th = std::tanh(scale * path.values.back());
        return scale * sigma * (1.0 - th * th);
    };
    return t;
}

} // namespace bsde
