#include "bsde/verify.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "bsde/errors.hpp"

namespace bsde {

namespace {

void update(Excursion& worst, bool& ok, double value, double allowed, double t,
            std::size_t node, std::size_t col, std::size_t atom) {
    const double amount = std::fabs(value) - allowed;
    if (amount > worst.amount)
        worst = {amount, t, node, col, atom};
    if (amount > 0.0)
        ok = false;
}

} // namespace

BoundsCheckReport check_bounds(const DiscreteSolution& sol, const BoundCertificate& cert,
                               double slack) {
    if (slack < 0.0)
        throw ConfigurationError("slack must be nonnegative");
    const std::size_t n_nodes = sol.grid.size();
    if (sol.Y.rows() != n_nodes || sol.Z.rows() != n_nodes ||
        (sol.U.size1() != n_nodes && !sol.U.empty()))
        throw ConfigurationError("solution arrays do not match its grid");
    const std::size_t cols = sol.n_cols();
    const std::size_t n_atoms = sol.atom_marks.size();

    BoundsCheckReport report;
    const double u_cap = 2.0 * cert.R - 2.0;
    for (std::size_t i = 0; i < n_nodes; ++i) {
        const double t = sol.grid[i];
        const double y_allowed = cert.y_envelope(t) + slack;
        const double z_allowed = cert.z_envelope(t) + slack;
        for (std::size_t c = 0; c < cols; ++c) {
            update(report.worst_y, report.y_ok, sol.Y(i, c), y_allowed, t, i, c, 0);
            update(report.worst_z, report.z_ok, sol.Z(i, c), z_allowed, t, i, c, 0);
        }
        for (std::size_t j = 0; j < n_atoms; ++j) {
            const double u_allowed =
                std::min(cert.u_envelope(t, sol.atom_marks[j]), u_cap) + slack;
            for (std::size_t c = 0; c < cols; ++c)
                update(report.worst_u, report.u_ok, sol.U(i, c, j), u_allowed, t, i, c, j);
        }
    }
    return report;
}

ComparisonReport check_comparison(const DiscreteSolution& sol,
                                  const DiscreteSolution& sol_prime, double tol) {
    if (tol < 0.0)
        throw ConfigurationError("tol must be nonnegative");
    if (!(sol.grid == sol_prime.grid) || sol.kind != sol_prime.kind ||
        sol.n_cols() != sol_prime.n_cols())
        throw ConfigurationError("comparison requires identical discretizations");
    if (sol.kind == SolutionKind::Lattice && sol.states != sol_prime.states)
        throw ConfigurationError("comparison requires identical state lattices");

    ComparisonReport report;
    report.worst_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sol.Y.rows(); ++i)
        for (std::size_t c = 0; c < sol.Y.cols(); ++c) {
            const double gap = sol.Y(i, c) - sol_prime.Y(i, c);
            if (gap > report.worst_gap) {
                report.worst_gap = gap;
                report.node = i;
                report.col = c;
                report.t = sol.grid[i];
            }
        }
    report.ok = report.worst_gap <= tol;
    return report;
}

std::pair<std::vector<double>, std::vector<double>>
sandwich_envelopes(const GeneratorSpec& spec, const TerminalSpec& terminal,
                   const BoundCertificate& cert, const TimeGrid& grid) {
    (void)cert;
    auto upper = closed_form_linear(terminal.A_xi, spec.a, spec.k_f, grid);
    std::vector<double> lower(upper.size());
    for (std::size_t i = 0; i < upper.size(); ++i)
        lower[i] = -upper[i];
    return {std::move(upper), std::move(lower)};
}

std::string bounds_report_json(const BoundsCheckReport& report) {
    nlohmann::json j = nlohmann::json::array();
    auto item = [](const char* name, bool ok, const Excursion& e) {
        return nlohmann::json{{"check", name},
                              {"ok", ok},
                              {"worst", e.amount},
                              {"location",
                               {{"t", e.t}, {"node", e.node}, {"col", e.col}, {"atom", e.atom}}}};
    };
    j.push_back(item("y_bound", report.y_ok, report.worst_y));
    j.push_back(item("z_bound", report.z_ok, report.worst_z));
    j.push_back(item("u_bound", report.u_ok, report.worst_u));
    return j.dump(2);
}

std::string comparison_report_json(const ComparisonReport& report) {
    nlohmann::json j{{"check", "comparison"},
                     {"ok", report.ok},
                     {"worst", report.worst_gap},
                     {"location", {{"t", report.t}, {"node", report.node}, {"col", report.col}}}};
    return j.dump(2);
}

} // namespace bsde
