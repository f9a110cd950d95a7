#include <doctest.h>

#include <cmath>
#include <memory>

#include <nlohmann/json.hpp>

#include "bsde/errors.hpp"
#include "bsde/generator.hpp"
#include "bsde/solver.hpp"
#include "bsde/verify.hpp"
#include "test_util.hpp"

using namespace bsde;

namespace {

ForwardSpec brownian_forward() {
    ForwardSpec fwd;
    fwd.b_coef = [](double) { return 0.0; };
    fwd.sigma_coef = [](double) { return 1.0; };
    fwd.beta = [](double, double) { return 0.0; };
    return fwd;
}

std::vector<double> small_lattice() {
    std::vector<double> v(21);
    for (std::size_t k = 0; k < v.size(); ++k)
        v[k] = -2.0 + 0.2 * static_cast<double>(k);
    return v;
}

} // namespace

TEST_CASE("check_bounds on the envelope problem") {
    // driver k_f + a|y| with constant terminal attains the y envelope exactly
    const double a0 = 0.8, k0 = 0.3, A_xi = 1.0, T = 1.0;
    GeneratorSpec spec = make_envelope_generator([a0](double) { return a0; },
                                                 [k0](double) { return k0; });
    TerminalSpec terminal = make_constant_terminal(A_xi);
    const TimeGrid grid = TimeGrid::uniform(T, 100);
    const auto cert = compute_bounds(spec, terminal, {}, T);
    auto sol = solve_markov_dp(brownian_forward(), spec, [&](double) { return A_xi; }, {},
                               small_lattice(), grid);
    const double slack = 10.0 * grid.dt(0);

    SUBCASE("passes with discretization slack") {
        const auto report = check_bounds(sol, cert, slack);
        CHECK(report.y_ok);
        CHECK(report.z_ok);
        CHECK(report.u_ok);
        // the solution sits essentially on the envelope at t = 0
        CHECK(std::fabs(sol.Y(0, 10)) ==
              doctest::Approx(cert.y_envelope(0.0)).epsilon(2e-2));
    }
    SUBCASE("corrupting Y is caught with a witness") {
        for (std::size_t c = 0; c < sol.n_cols(); ++c)
            sol.Y(3, c) *= 10.0;
        const auto report = check_bounds(sol, cert, slack);
        CHECK(!report.y_ok);
        CHECK(report.worst_y.node == 3);
        CHECK(report.worst_y.amount > 0.0);
        CHECK(report.z_ok);
    }
}

TEST_CASE("check_bounds accepts the all-zero solution") {
    GeneratorSpec spec = make_zero_generator();
    TerminalSpec terminal = make_constant_terminal(0.0);
    const TimeGrid grid = TimeGrid::uniform(1.0, 10);
    const auto cert = compute_bounds(spec, terminal, {}, 1.0);
    const auto sol = solve_markov_dp(brownian_forward(), spec, [](double) { return 0.0; },
                                     {}, small_lattice(), grid);
    const auto report = check_bounds(sol, cert, 0.0);
    CHECK(report.ok());
}

TEST_CASE("check_comparison") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 50);
    const auto lattice = small_lattice();
    const auto fwd = brownian_forward();

    SUBCASE("ordered constant terminals with zero driver") {
        const auto lo = solve_markov_dp(fwd, make_zero_generator(),
                                        [](double) { return 0.0; }, {}, lattice, grid);
        const auto hi = solve_markov_dp(fwd, make_zero_generator(),
                                        [](double) { return 1.0; }, {}, lattice, grid);
        const auto report = check_comparison(lo, hi, 1e-8);
        CHECK(report.ok);
        CHECK(report.worst_gap == doctest::Approx(-1.0).epsilon(1e-9));
        // antisymmetric when the gap is strictly positive
        const auto swapped = check_comparison(hi, lo, 1e-8);
        CHECK(!swapped.ok);
        CHECK(swapped.worst_gap == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("linear driver gap matches the closed form at every node") {
        const double a0 = 1.0;
        GeneratorSpec spec = make_linear_generator(a0, 0.0, 0.0, 0.0);
        const auto lo = solve_markov_dp(fwd, spec, [](double) { return 0.0; }, {}, lattice,
                                        grid);
        const auto hi = solve_markov_dp(fwd, spec, [](double) { return 1.0; }, {}, lattice,
                                        grid);
        CHECK(check_comparison(lo, hi, 1e-8).ok);
        for (std::size_t i = 0; i < grid.size(); i += 10) {
            const double gap = hi.Y(i, 10) - lo.Y(i, 10);
            CHECK(gap == doctest::Approx(std::exp(a0 * (1.0 - grid[i]))).epsilon(1e-2));
        }
    }
    SUBCASE("identical inputs give worst gap zero") {
        const auto sol = solve_markov_dp(fwd, make_zero_generator(),
                                         [](double v) { return v; }, {}, lattice, grid);
        const auto report = check_comparison(sol, sol, 0.0);
        CHECK(report.ok);
        CHECK(report.worst_gap == 0.0);
    }
    SUBCASE("mismatched discretizations are rejected") {
        const auto a = solve_markov_dp(fwd, make_zero_generator(),
                                       [](double) { return 0.0; }, {}, lattice, grid);
        const auto b = solve_markov_dp(fwd, make_zero_generator(),
                                       [](double) { return 0.0; }, {}, lattice,
                                       TimeGrid::uniform(1.0, 25));
        CHECK_THROWS_AS(check_comparison(a, b, 0.0), ConfigurationError);
    }
}

TEST_CASE("sandwich_envelopes") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 20);
    SUBCASE("zero data gives zero envelopes") {
        GeneratorSpec spec = make_zero_generator();
        TerminalSpec terminal = make_constant_terminal(0.0);
        const auto cert = compute_bounds(spec, terminal, {}, 1.0);
        const auto [upper, lower] = sandwich_envelopes(spec, terminal, cert, grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            CHECK(upper[i] == doctest::Approx(0.0));
            CHECK(lower[i] == doctest::Approx(0.0));
        }
    }
    SUBCASE("solved problem stays inside the sandwich; lower = -upper") {
        GeneratorSpec spec = make_linear_generator(0.5, 0.25, 0.0, 0.1);
        TerminalSpec terminal = make_tanh_terminal(1.0, 1.0);
        const auto cert = compute_bounds(spec, terminal, {}, 1.0);
        const auto [upper, lower] = sandwich_envelopes(spec, terminal, cert, grid);
        const auto sol = solve_markov_dp(brownian_forward(), spec,
                                         [](double v) { return std::tanh(v); }, {},
                                         small_lattice(), grid);
        const double tol = 10.0 * grid.dt(0);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            CHECK(lower[i] == -upper[i]);
            for (std::size_t k = 0; k < sol.n_cols(); ++k) {
                CHECK(sol.Y(i, k) <= upper[i] + tol);
                CHECK(sol.Y(i, k) >= lower[i] - tol);
            }
        }
    }
}

TEST_CASE("reports serialize to json with the expected fields") {
    BoundsCheckReport report;
    report.y_ok = false;
    report.worst_y = {0.25, 0.5, 3, 7, 0};
    const auto parsed = nlohmann::json::parse(bounds_report_json(report));
    REQUIRE(parsed.is_array());
    CHECK(parsed[0]["check"] == "y_bound");
    CHECK(parsed[0]["ok"] == false);
    CHECK(parsed[0]["worst"] == doctest::Approx(0.25));
    CHECK(parsed[0]["location"]["node"] == 3);

    ComparisonReport cmp;
    cmp.ok = true;
    cmp.worst_gap = -0.5;
    const auto parsed_cmp = nlohmann::json::parse(comparison_report_json(cmp));
    CHECK(parsed_cmp["check"] == "comparison");
    CHECK(parsed_cmp["ok"] == true);
    CHECK(parsed_cmp["worst"] == doctest::Approx(-0.5));
}
