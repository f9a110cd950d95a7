#include "bsde/csv.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <vector>

#include "bsde/errors.hpp"

namespace bsde {

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_solution_csv(std::ostream& os, const DiscreteSolution& sol) {
    os << "t,where,quantity,value\n";
    const std::size_t cols = sol.n_cols();
    for (std::size_t i = 0; i < sol.grid.size(); ++i) {
        const std::string t = format_value(sol.grid[i]);
        for (std::size_t c = 0; c < cols; ++c) {
            const std::string where =
                (sol.kind == SolutionKind::Lattice) ? format_value(sol.states[c])
                                                    : std::to_string(c);
            os << t << ',' << where << ",Y," << format_value(sol.Y(i, c)) << '\n';
            os << t << ',' << where << ",Z," << format_value(sol.Z(i, c)) << '\n';
            for (std::size_t j = 0; j < sol.atom_marks.size(); ++j)
                os << t << ',' << where << ",U@" << format_value(sol.atom_marks[j]) << ','
                   << format_value(sol.U(i, c, j)) << '\n';
        }
    }
}

DiscreteSolution read_solution_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("t,where,quantity,value", 0) != 0)
        throw ConfigurationError("solution CSV: missing header row");

    struct Row {
        double t, where, value;
        std::string quantity;
    };
    std::vector<Row> rows;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string t_s, where_s, q_s, v_s;
        if (!std::getline(ss, t_s, ',') || !std::getline(ss, where_s, ',') ||
            !std::getline(ss, q_s, ',') || !std::getline(ss, v_s))
            throw ConfigurationError("solution CSV: malformed row: " + line);
        rows.push_back({std::stod(t_s), std::stod(where_s), std::stod(v_s), q_s});
    }
    if (rows.empty())
        throw ConfigurationError("solution CSV: no data rows");

    std::vector<double> times, wheres, marks;
    for (const auto& r : rows) {
        times.push_back(r.t);
        wheres.push_back(r.where);
        if (r.quantity.rfind("U@", 0) == 0)
            marks.push_back(std::stod(r.quantity.substr(2)));
    }
    auto unique_sorted = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    unique_sorted(times);
    unique_sorted(wheres);
    unique_sorted(marks);

    std::map<double, std::size_t> t_index, w_index, m_index;
    for (std::size_t i = 0; i < times.size(); ++i)
        t_index[times[i]] = i;
    for (std::size_t i = 0; i < wheres.size(); ++i)
        w_index[wheres[i]] = i;
    for (std::size_t i = 0; i < marks.size(); ++i)
        m_index[marks[i]] = i;

    DiscreteSolution sol;
    sol.grid = TimeGrid(times);
    sol.kind = SolutionKind::Lattice;
    sol.states = wheres;
    sol.atom_marks = marks;
    sol.Y = Array2(times.size(), wheres.size());
    sol.Z = Array2(times.size(), wheres.size());
    sol.U = Array3(times.size(), wheres.size(), marks.size());

    for (const auto& r : rows) {
        const std::size_t i = t_index.at(r.t);
        const std::size_t c = w_index.at(r.where);
        if (r.quantity == "Y")
            sol.Y(i, c) = r.value;
        else if (r.quantity == "Z")
            sol.Z(i, c) = r.value;
        else if (r.quantity.rfind("U@", 0) == 0)
            sol.U(i, c, m_index.at(std::stod(r.quantity.substr(2)))) = r.value;
        else
            throw ConfigurationError("solution CSV: unknown quantity " + r.quantity);
    }
    return sol;
}

void write_paths_csv(std::ostream& os, const PathBundle& bundle) {
    os << "t,path,X\n";
    for (std::size_t p = 0; p < bundle.n_paths; ++p)
        for (std::size_t i = 0; i < bundle.grid.size(); ++i)
            os << format_value(bundle.grid[i]) << ',' << p << ','
               << format_value(bundle.value(p, i)) << '\n';
}

void write_pdie_csv(std::ostream& os, const PdieGrid& grid) {
    os << "t,v,u\n";
    for (std::size_t i = 0; i < grid.tgrid.size(); ++i)
        for (std::size_t k = 0; k < grid.space_nodes.size(); ++k)
            os << format_value(grid.tgrid[i]) << ',' << format_value(grid.space_nodes[k])
               << ',' << format_value(grid.values(i, k)) << '\n';
}

void write_hlimit_csv(std::ostream& os, std::span<const HLimitRow> table) {
    os << "n,m,dY,dZ,dU\n";
    for (const auto& row : table)
        os << row.n << ',' << row.m << ',' << format_value(row.dY) << ','
           << format_value(row.dZ) << ',' << format_value(row.dU) << '\n';
}

} // namespace bsde
