#include <doctest.h>

#include <cmath>
#include <vector>

#include "bsde/errors.hpp"
#include "bsde/generator.hpp"
#include "bsde/rng.hpp"
#include "test_util.hpp"

using namespace bsde;

namespace {

GeneratorSpec identity_g_spec() {
    GeneratorSpec spec = make_zero_generator();
    spec.g = [](double, double u) { return u; };
    spec.dg = [](double, double) { return 1.0; };
    return spec;
}

} // namespace

TEST_CASE("eval_G examples") {
    const std::vector<JumpAtom> one_atom{{1.0, 2.0}};
    GeneratorSpec spec = identity_g_spec();
    SUBCASE("zero field aggregates to zero") {
        CHECK(eval_G(spec, 0.0, [](double) { return 0.0; }, one_atom) == 0.0);
    }
    SUBCASE("identity g, single atom") {
        CHECK(eval_G(spec, 0.0, [](double) { return 3.0; }, one_atom) ==
              doctest::Approx(6.0));
    }
    SUBCASE("quadratic g, fractional mark picks up kappa") {
        spec.g = [](double, double u) { return u * u; };
        const std::vector<JumpAtom> half{{0.5, 1.0}};
        CHECK(eval_G(spec, 0.0, [](double) { return 2.0; }, half) == doctest::Approx(2.0));
    }
}

TEST_CASE("smooth_clamp examples and derivative bounds") {
    CHECK(smooth_clamp(2.0, 5.0) == 2.0);
    CHECK(smooth_clamp(7.0, 5.0) == 5.0);
    CHECK(smooth_clamp(-7.0, 5.0) == -5.0);
    const double mid = smooth_clamp(5.0, 5.0);
    CHECK(mid > 4.0);
    CHECK(mid < 5.0);
    CHECK(mid == doctest::Approx(4.75));
    const double h = 1e-6;
    const double slope = (smooth_clamp(5.0 + h, 5.0) - smooth_clamp(5.0 - h, 5.0)) / (2 * h);
    CHECK(slope >= 0.0);
    CHECK(slope <= 1.0);
    CHECK(slope == doctest::Approx(0.5).epsilon(1e-5));
    CHECK_THROWS_AS(smooth_clamp(0.0, 0.5), DomainError);
}

TEST_CASE("smooth_clamp randomized properties") {
    CounterRng rng(31, 0);
    for (int trial = 0; trial < 1000; ++trial) {
        const double M = test::uniform(rng, 1.0, 10.0);
        const double x = test::uniform(rng, -2.0 * M, 2.0 * M);
        const double v = smooth_clamp(x, M);
        CHECK(smooth_clamp(-x, M) == doctest::Approx(-v).epsilon(1e-14)); // odd
        CHECK(std::fabs(v) <= std::min(std::fabs(x), M) + 1e-14);
        if (std::fabs(x) <= M - 1.0)
            CHECK(v == x); // identity on the inner region
        const double h = 1e-6;
        const double num = (smooth_clamp(x + h, M) - smooth_clamp(x - h, M)) / (2 * h);
        CHECK(num >= -1e-6);
        CHECK(num <= 1.0 + 1e-6);
        CHECK(smooth_clamp_deriv(x, M) == doctest::Approx(num).epsilon(1e-4));
    }
}

TEST_CASE("compute_bounds examples") {
    const std::vector<JumpAtom> no_atoms;
    SUBCASE("all-zero data collapses to constants plus one") {
        GeneratorSpec spec = make_zero_generator();
        TerminalSpec terminal = make_constant_terminal(1.0);
        const auto cert = compute_bounds(spec, terminal, no_atoms, 1.0);
        CHECK(cert.R == doctest::Approx(2.0).epsilon(1e-10));
        CHECK(cert.Q == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(cert.P == doctest::Approx(1.0).epsilon(1e-10));
    }
    SUBCASE("a = 1 gives R = e + 1") {
        GeneratorSpec spec = make_linear_generator(1.0, 0.0, 0.0, 0.0);
        TerminalSpec terminal = make_constant_terminal(1.0);
        const auto cert = compute_bounds(spec, terminal, no_atoms, 1.0);
        CHECK(cert.R == doctest::Approx(std::exp(1.0) + 1.0).epsilon(1e-7));
    }
    SUBCASE("constant k_f integrates to T") {
        GeneratorSpec spec = make_envelope_generator([](double) { return 0.0; },
                                                     [](double) { return 1.0; });
        TerminalSpec terminal = make_constant_terminal(0.0);
        const auto cert = compute_bounds(spec, terminal, no_atoms, 2.0);
        CHECK(cert.R == doctest::Approx(3.0).epsilon(1e-9));
    }
    SUBCASE("envelopes dominate their terminal values") {
        GeneratorSpec spec = make_linear_generator(0.5, 0.2, 0.1, 0.3);
        TerminalSpec terminal = make_tanh_terminal(1.0, 1.0);
        const std::vector<JumpAtom> atoms{{0.5, 1.0}};
        const auto cert = compute_bounds(spec, terminal, atoms, 1.0);
        CHECK(cert.y_envelope(1.0) == doctest::Approx(terminal.A_xi).epsilon(1e-9));
        CHECK(cert.y_envelope(0.0) >= terminal.A_xi);
        CHECK(cert.z_envelope(0.0) >= terminal.A_Dxi(0.0) - 1e-12);
        CHECK(cert.u_envelope(0.0, 0.5) >= terminal.A_Dxi(0.5) - 1e-12);
    }
}

TEST_CASE("compute_bounds is monotone in the data") {
    const std::vector<JumpAtom> atoms{{0.5, 1.0}, {1.5, 0.25}};
    CounterRng rng(77, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const double a1 = test::uniform(rng, 0.0, 1.0), a2 = a1 + test::uniform(rng, 0.0, 1.0);
        const double k1 = test::uniform(rng, 0.0, 1.0), k2 = k1 + test::uniform(rng, 0.0, 1.0);
        const double axi1 = test::uniform(rng, 0.0, 2.0),
                     axi2 = axi1 + test::uniform(rng, 0.0, 1.0);
        auto make = [&](double a, double k, double axi) {
            GeneratorSpec spec = make_envelope_generator([a](double) { return a; },
                                                         [k](double) { return k; });
            TerminalSpec terminal = make_constant_terminal(axi);
            terminal.A_Dxi = [axi](double) { return axi; };
            return compute_bounds(spec, terminal, atoms, 1.0);
        };
        const auto lo = make(a1, k1, axi1);
        const auto hi = make(a2, k2, axi2);
        CHECK(hi.R >= lo.R - 1e-12);
        CHECK(hi.Q >= lo.Q - 1e-12);
        CHECK(hi.P >= lo.P - 1e-12);
    }
}

TEST_CASE("truncate_generator") {
    const std::vector<JumpAtom> atoms{{0.5, 1.0}};
    GeneratorSpec spec = make_subquadratic_z_generator(0.5);
    // give f a real u dependence so the clamp on the aggregate matters
    spec.f = [](const PathSegment&, double, double y, double z, double u_agg) {
        return 0.5 * z * std::tanh(z) + 0.25 * u_agg + 0.1 * y;
    };
    spec.df_y = spec.df_z = spec.df_u = nullptr;
    spec.a = [](double) { return 0.1; };
    TerminalSpec terminal = make_tanh_terminal(1.0, 1.0);
    const auto cert = compute_bounds(spec, terminal, atoms, 1.0);
    const auto trunc = truncate_generator(spec, cert, atoms);

    const double t0 = 0.0, v0 = 0.0;
    const auto seg = test::flat_segment(t0, v0);

    SUBCASE("identity on the inner box") {
        CounterRng rng(3, 0);
        for (int trial = 0; trial < 1000; ++trial) {
            const double y = test::uniform(rng, -(cert.R - 1.0), cert.R - 1.0);
            const double z = test::uniform(rng, -(cert.Q - 1.0), cert.Q - 1.0);
            const double cap = std::min(2.0 * cert.R - 2.0, (cert.P - 1.0) / 0.5);
            const double u = test::uniform(rng, -cap, cap);
            std::vector<double> u_vec{u};
            CHECK(trunc.eval(seg, 0.0, y, z, u_vec, atoms) ==
                  spec.eval(seg, 0.0, y, z, u_vec, atoms));
        }
    }
    SUBCASE("constant beyond saturation") {
        const double far1 = trunc.f(seg, 0.0, cert.R + 2.0, 0.0, 0.0);
        const double far2 = trunc.f(seg, 0.0, cert.R + 3.0, 0.0, 0.0);
        CHECK(far1 == far2);
    }
    SUBCASE("sampled z-slopes respect the global Lipschitz constant") {
        const double bound = truncated_zu_lipschitz(spec, cert, atoms) * spec.b(0.0);
        CounterRng rng(4, 0);
        for (int trial = 0; trial < 1000; ++trial) {
            const double z = test::uniform(rng, -3.0 * cert.Q, 3.0 * cert.Q);
            const double dz = test::uniform(rng, 1e-4, 0.1);
            const double slope = (trunc.f(seg, 0.0, 0.0, z + dz, 0.0) -
                                  trunc.f(seg, 0.0, 0.0, z, 0.0)) /
                                 dz;
            CHECK(std::fabs(slope) <= bound + 1e-6);
        }
    }
    SUBCASE("growth bound in the truncated variables") {
        CounterRng rng(5, 0);
        const double zu = truncated_zu_lipschitz(spec, cert, atoms);
        for (int trial = 0; trial < 1000; ++trial) {
            const double y = test::uniform(rng, -10.0, 10.0);
            const double z = test::uniform(rng, -10.0, 10.0);
            const double u = test::uniform(rng, -10.0, 10.0);
            std::vector<double> u_vec{u};
            const double u_norm = std::fabs(u) * std::sqrt(atoms[0].intensity);
            const double lhs = std::fabs(trunc.eval(seg, 0.0, y, z, u_vec, atoms));
            const double rhs = spec.k_f(0.0) + spec.a(0.0) * std::fabs(y) +
                               zu * spec.b(0.0) * (std::fabs(z) + u_norm);
            CHECK(lhs <= rhs + 1e-9);
        }
    }
}

TEST_CASE("aggregation Lipschitz estimate with the truncated field") {
    // |G(t, u) - G(t, u')| <= rho(2R) ||kappa|| ||u - u'|| for fields in [-2R, 2R]
    const std::vector<JumpAtom> atoms{{0.25, 2.0}, {0.8, 0.5}, {2.0, 0.1}};
    GeneratorSpec spec = make_zero_generator();
    spec.g = [](double, double u) { return u * u; };
    spec.dg = [](double, double u) { return 2.0 * u; };
    spec.rho = [](double r) { return 2.0 * r; }; // |g(u)-g(u')| <= 2 max(|u|,|u'|) |u-u'|
    const double R = 1.5;
    const double norm_kappa = kappa_l2_norm(atoms);
    CounterRng rng(6, 0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> u1(atoms.size()), u2(atoms.size());
        double diff_norm_sq = 0.0;
        for (std::size_t j = 0; j < atoms.size(); ++j) {
            u1[j] = test::uniform(rng, -2.0 * R, 2.0 * R);
            u2[j] = test::uniform(rng, -2.0 * R, 2.0 * R);
            diff_norm_sq += (u1[j] - u2[j]) * (u1[j] - u2[j]) * atoms[j].intensity;
        }
        const double lhs = std::fabs(eval_G(spec, 0.0, u1, atoms) -
                                     eval_G(spec, 0.0, u2, atoms));
        const double rhs = spec.rho(2.0 * R) * norm_kappa * std::sqrt(diff_norm_sq);
        CHECK(lhs <= rhs + 1e-12);
    }
}

TEST_CASE("check_comparison_condition examples") {
    SampleBox box;
    box.t = {0.0, 1.0};
    box.y = {-1.0, 1.0};
    box.z = {-1.0, 1.0};
    box.u = {-1.0, 1.0};
    box.u_prime = {-1.0, 1.0};
    SUBCASE("u-independent driver passes") {
        const auto report = check_comparison_condition(make_linear_generator(1.0, 0.5, 0.0, 0.0), box);
        CHECK(report.ok);
        CHECK(report.worst_violation == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("f_u = 1 with identity g passes") {
        const auto report =
            check_comparison_condition(make_linear_generator(0.0, 0.0, 1.0, 0.0), box);
        CHECK(report.ok);
        CHECK(report.worst_violation == doctest::Approx(2.0).epsilon(1e-9));
    }
    SUBCASE("f_u = -2 with identity g fails with violation -1") {
        const auto report =
            check_comparison_condition(make_linear_generator(0.0, 0.0, -2.0, 0.0), box);
        CHECK(!report.ok);
        CHECK(report.worst_violation == doctest::Approx(-1.0).epsilon(1e-9));
    }
}

TEST_CASE("built-in family coefficient data is self-consistent") {
    // local Lipschitz audit of (y, z, u) differences against a, rho, b
    CounterRng rng(8, 0);
    const GeneratorSpec spec = make_subquadratic_z_generator(0.5);
    const double t0 = 0.0, v0 = 0.0;
    const auto seg = test::flat_segment(t0, v0);
    for (int trial = 0; trial < 1000; ++trial) {
        const double z1 = test::uniform(rng, -4.0, 4.0);
        const double z2 = test::uniform(rng, -4.0, 4.0);
        const double lhs = std::fabs(spec.f(seg, 0.0, 0.0, z1, 0.0) -
                                     spec.f(seg, 0.0, 0.0, z2, 0.0));
        const double rhs = spec.rho(std::max(std::fabs(z1), std::fabs(z2))) *
                           spec.b(0.0) * std::fabs(z1 - z2);
        CHECK(lhs <= rhs + 1e-12);
    }
    // |f(t,0,0,0)| <= k_f
    CHECK(std::fabs(spec.f(seg, 0.0, 0.0, 0.0, 0.0)) <= spec.k_f(0.0));
    // g(t, 0) = 0 on a grid of times
    for (double t = 0.0; t <= 1.0; t += 0.1)
        CHECK(spec.g(t, 0.0) == 0.0);
}

TEST_CASE("terminal specs respect their declared bounds on sampled paths") {
    const LevyTriplet model(0.1, 1.0, {{-0.4, 0.5}, {1.2, 0.8}});
    const TimeGrid grid = TimeGrid::uniform(1.0, 8);
    const auto bundle = sample_paths(model, grid, 200, 14);
    TerminalSpec terminal = make_tanh_terminal(1.0, 1.0);
    CounterRng rng(15, 0);
    for (std::size_t p = 0; p < bundle.n_paths; ++p) {
        const PathSegment full{grid.nodes(), bundle.path(p)};
        CHECK(std::fabs(terminal.xi(full)) <= terminal.A_xi);
        const double r = test::uniform(rng, 0.0, 1.0);
        const double v = test::uniform(rng, -3.0, 3.0);
        if (v == 0.0)
            continue;
        const auto shifted = shift_path(bundle, p, r, v);
        const PathSegment moved{grid.nodes(), shifted};
        CHECK(std::fabs(terminal.xi(moved) - terminal.xi(full)) <=
              terminal.A_Dxi(v) + 1e-12);
    }
}

TEST_CASE("non-integrable coefficients are a configuration error") {
    GeneratorSpec spec = make_zero_generator();
    spec.a = [](double s) { return 1.0 / s; };
    TerminalSpec terminal = make_constant_terminal(1.0);
    CHECK_THROWS_AS(compute_bounds(spec, terminal, {}, 1.0), ConfigurationError);
}
